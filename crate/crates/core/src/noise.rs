//! The measurement-dependent noise function `p[s]` and the binary symmetric
//! channel it drives.

use rand::Rng;

use crate::error::{check_domain, Error, Result};

/// Crossover probability as a function of the probed measure `s`.
///
/// Models are immutable once built. Every constructor checks that the function
/// is non-decreasing on `[0, 1/2]` and stays inside `[0, 1/2]`; the simulator
/// additionally requires `p[1/2] < 1/2` (see [`NoiseModel::check_simulable`]).
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// `p[s] = p0` for every `s`.
    Constant { p0: f64 },
    /// Straight line from `p[0] = p0` to `p[1/2] = phalf`.
    Linear { p0: f64, phalf: f64 },
    /// Piecewise-linear interpolation between `(measure, probability)` knots,
    /// constant beyond the first and last knot.
    Table { knots: Vec<(f64, f64)> },
}

fn check_probability(what: &str, p: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::InvalidModel(format!(
            "{what} = {p} must lie in [0, 1/2]"
        )));
    }
    Ok(())
}

impl NoiseModel {
    pub fn constant(p0: f64) -> Result<Self> {
        check_probability("p0", p0)?;
        Ok(NoiseModel::Constant { p0 })
    }

    pub fn linear(p0: f64, phalf: f64) -> Result<Self> {
        check_probability("p0", p0)?;
        check_probability("phalf", phalf)?;
        if phalf < p0 {
            return Err(Error::InvalidModel(format!(
                "phalf = {phalf} is below p0 = {p0}; p must be non-decreasing"
            )));
        }
        Ok(NoiseModel::Linear { p0, phalf })
    }

    pub fn table(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidModel("table needs at least one knot".into()));
        }
        for (i, &(s, p)) in knots.iter().enumerate() {
            if !(0.0..=0.5).contains(&s) {
                return Err(Error::InvalidModel(format!(
                    "knot {i}: measure {s} must lie in [0, 1/2]"
                )));
            }
            check_probability("knot probability", p)?;
            if i > 0 {
                let (s_prev, p_prev) = knots[i - 1];
                if s <= s_prev {
                    return Err(Error::InvalidModel(format!(
                        "knot {i}: measures must be strictly increasing ({s_prev} then {s})"
                    )));
                }
                if p < p_prev {
                    return Err(Error::InvalidModel(format!(
                        "knot {i}: probabilities must be non-decreasing ({p_prev} then {p})"
                    )));
                }
            }
        }
        Ok(NoiseModel::Table { knots })
    }

    /// `p[0]`, the continuous extension to an empty probe.
    pub fn p0(&self) -> f64 {
        self.eval(0.0)
    }

    /// `p[1/2]`.
    pub fn phalf(&self) -> f64 {
        self.eval(0.5)
    }

    /// Evaluates `p[s]` after clamping `s` into `[0, 1/2]`.
    ///
    /// This is the hot-path form used by the simulator, where the measure is
    /// already known to be in range.
    pub fn eval(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 0.5);
        match self {
            NoiseModel::Constant { p0 } => *p0,
            NoiseModel::Linear { p0, phalf } => p0 + (phalf - p0) * (s / 0.5),
            NoiseModel::Table { knots } => interpolate(knots, s),
        }
    }

    /// `p[s]` for `s` in `(0, 1/2]`.
    pub fn noise_at(&self, s: f64) -> Result<f64> {
        check_domain("s", s, s > 0.0 && s <= 0.5, "(0, 1/2]")?;
        Ok(self.eval(s))
    }

    /// The model seen from inside a zoom window of width `alpha`: a relative
    /// measure `s` corresponds to an absolute measure `alpha * s`.
    pub fn zoomed(&self, alpha: f64) -> Result<Self> {
        check_domain("alpha", alpha, alpha > 0.0 && alpha <= 1.0, "(0, 1]")?;
        Ok(match self {
            NoiseModel::Constant { p0 } => NoiseModel::Constant { p0: *p0 },
            NoiseModel::Linear { p0, .. } => NoiseModel::Linear {
                p0: *p0,
                phalf: self.eval(alpha * 0.5),
            },
            NoiseModel::Table { knots } => {
                let mut zk: Vec<(f64, f64)> = knots
                    .iter()
                    .map(|&(s, p)| (s / alpha, p))
                    .filter(|&(s, _)| s < 0.5)
                    .collect();
                zk.push((0.5, self.eval(alpha * 0.5)));
                NoiseModel::Table { knots: zk }
            }
        })
    }

    /// Rejects models the simulator cannot run: a probe with crossover 1/2
    /// carries no information and the ML decoder is undefined there.
    pub fn check_simulable(&self) -> Result<()> {
        if self.phalf() >= 0.5 {
            return Err(Error::InvalidModel(format!(
                "p[1/2] = {} must be below 1/2 for simulation",
                self.phalf()
            )));
        }
        Ok(())
    }
}

fn interpolate(knots: &[(f64, f64)], s: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if s <= first.0 {
        return first.1;
    }
    if s >= last.0 {
        return last.1;
    }
    // First knot strictly to the right of s.
    let hi = knots.partition_point(|&(k, _)| k <= s);
    let (s0, p0) = knots[hi - 1];
    let (s1, p1) = knots[hi];
    p0 + (p1 - p0) * (s - s0) / (s1 - s0)
}

/// Passes bit `x` through a BSC with crossover `p`. Consumes exactly one draw.
pub fn sample_bsc<R: Rng + ?Sized>(p: f64, x: bool, rng: &mut R) -> bool {
    let flip = rng.random::<f64>() < p;
    x ^ flip
}
