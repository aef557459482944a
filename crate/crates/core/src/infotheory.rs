//! Rate and reliability quantities. All logarithms are base 2, so rates and
//! exponents are in bits per query.

use std::fmt::Write as _;

use crate::error::{check_domain, Result};
use crate::noise::NoiseModel;
use crate::optimize::grid_then_golden;

/// Grid step used by every 1-D optimisation before golden-section refinement.
pub const GRID_STEP: f64 = 1e-4;
/// Final bracket width of the golden-section refinement.
pub const REFINE_TOL: f64 = 1e-6;

/// Rate prefactor of the non-adaptive maximal targeting rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kappa {
    /// Unknown velocity: position and velocity must both be resolved.
    Half,
    /// Known velocity.
    One,
}

impl Kappa {
    pub fn value(self) -> f64 {
        match self {
            Kappa::Half => 0.5,
            Kappa::One => 1.0,
        }
    }
}

#[inline]
fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

#[inline]
fn info(q: f64, p: f64) -> f64 {
    h2(q * (1.0 - p) + (1.0 - q) * p) - h2(p)
}

/// Binary entropy `h(p)` with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_domain("p", p, (0.0..=1.0).contains(&p), "[0, 1]")?;
    Ok(h2(p))
}

/// `I(q, p)`: mutual information between a `Bern(q)` input and the output of
/// a BSC with crossover `p`.
pub fn mutual_info(q: f64, p: f64) -> Result<f64> {
    check_domain("q", q, (0.0..=1.0).contains(&q), "[0, 1]")?;
    check_domain("p", p, (0.0..=0.5).contains(&p), "[0, 1/2]")?;
    Ok(info(q, p))
}

/// Shannon capacity `C(p) = 1 - h(p)` of a BSC.
pub fn capacity(p: f64) -> Result<f64> {
    check_domain("p", p, (0.0..=0.5).contains(&p), "[0, 1/2]")?;
    Ok(1.0 - h2(p))
}

/// `C1(p) = D(p || 1-p) = (1 - 2p) log2((1-p)/p)`. Infinite at `p = 0`.
pub fn c1(p: f64) -> Result<f64> {
    check_domain("p", p, (0.0..=0.5).contains(&p), "[0, 1/2]")?;
    if p == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((1.0 - 2.0 * p) * ((1.0 - p) / p).log2())
}

#[inline]
fn e0(rho: f64, q: f64, p: f64) -> f64 {
    let s = 1.0 / (1.0 + rho);
    let (a, b) = (p.powf(s), (1.0 - p).powf(s));
    // Output y = 0 sees W(0|0) = 1-p, W(0|1) = p; y = 1 is the mirror image.
    let y0 = (1.0 - q) * b + q * a;
    let y1 = (1.0 - q) * a + q * b;
    let total = y0.powf(1.0 + rho) + y1.powf(1.0 + rho);
    -total.log2()
}

/// Gallager's `E0(rho, Q)` for a BSC with crossover `p` and input `Bern(q)`.
pub fn gallager_e0(rho: f64, q: f64, p: f64) -> Result<f64> {
    check_domain("rho", rho, (0.0..=1.0).contains(&rho), "[0, 1]")?;
    check_domain("q", q, q > 0.0 && q < 1.0, "(0, 1)")?;
    check_domain("p", p, (0.0..=0.5).contains(&p), "[0, 1/2]")?;
    Ok(e0(rho, q, p).max(0.0))
}

/// Random coding exponent at rate `r`: `max_rho E0(rho, q, p) - rho r / kappa`,
/// clamped at zero.
pub fn random_coding_exponent(r: f64, q: f64, p: f64, kappa: Kappa) -> Result<f64> {
    check_domain("R", r, r >= 0.0, "[0, inf)")?;
    check_domain("q", q, q > 0.0 && q < 1.0, "(0, 1)")?;
    check_domain("p", p, (0.0..=0.5).contains(&p), "[0, 1/2]")?;
    let per_use = r / kappa.value();
    let (_, best) = grid_then_golden(
        |rho| e0(rho, q, p) - rho * per_use,
        0.0,
        1.0,
        GRID_STEP,
        REFINE_TOL,
    );
    Ok(best.max(0.0))
}

/// The input mass maximising `kappa * I(q, p[q])` and the value attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalInput {
    pub q: f64,
    pub rate: f64,
}

/// Maximal non-adaptive targeting rate `max_q kappa I(q, p[q])` over
/// `q` in `(0, 1/2]`, with its maximiser `q*`.
///
/// The objective is scanned on a `1e-4` grid (ties to the larger `q`) and
/// refined to `1e-6`. Scaling by `kappa` is exact in floating point, so both
/// velocity modes share the same `q*` bit for bit.
pub fn optimal_q(model: &NoiseModel, kappa: Kappa) -> OptimalInput {
    let k = kappa.value();
    let (q, rate) = grid_then_golden(
        |q| k * info(q, model.eval(q)),
        GRID_STEP,
        0.5,
        GRID_STEP,
        REFINE_TOL,
    );
    OptimalInput { q, rate }
}

/// Maximal adaptive targeting rate `C(p[0])`.
pub fn max_rate_adaptive(model: &NoiseModel) -> f64 {
    1.0 - h2(model.p0())
}

/// The line `c1 * (1 - r / intercept)`, zero at and beyond the intercept.
fn validation_line(r: f64, c1: f64, intercept: f64) -> f64 {
    if r >= intercept {
        0.0
    } else if c1.is_infinite() {
        f64::INFINITY
    } else {
        c1 * (1.0 - r / intercept)
    }
}

/// Reliability of non-adaptive search followed by Yamamoto-Itoh validation:
/// `C1(p[0]) (1 - R / (kappa I(q*, p[q*])))`.
pub fn yi_nonadaptive_exponent(r: f64, model: &NoiseModel, kappa: Kappa) -> Result<f64> {
    check_domain("R", r, r >= 0.0, "[0, inf)")?;
    let opt = optimal_q(model, kappa);
    Ok(validation_line(r, c1(model.p0())?, opt.rate))
}

/// Reliability of the two-phase adaptive scheme: `C1(p[0]) (1 - R / C(p[0]))`.
pub fn yi_adaptive_exponent(r: f64, model: &NoiseModel) -> Result<f64> {
    check_domain("R", r, r >= 0.0, "[0, inf)")?;
    Ok(validation_line(r, c1(model.p0())?, max_rate_adaptive(model)))
}

/// Burnashev's exponent for a BSC with crossover `p`: `C1(p) (1 - R / C(p))`.
pub fn burnashev_exponent(r: f64, p: f64) -> Result<f64> {
    check_domain("R", r, r >= 0.0, "[0, inf)")?;
    Ok(validation_line(r, c1(p)?, capacity(p)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveId {
    /// (a) random coding exponent at `q*`.
    RandomCoding,
    /// (b) decision-feedback (Forney erasure) exponent, estimated by simulation.
    DecisionFeedbackEmpirical,
    /// (c) Burnashev's exponent for `BSC(p[q*])`.
    BurnashevQstar,
    /// (d) non-adaptive search with Yamamoto-Itoh validation.
    YiNonadaptive,
    /// (e) Yamamoto-Itoh validation over `BSC(p[0])`.
    YiAdaptive,
}

impl CurveId {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveId::RandomCoding => "random_coding",
            CurveId::DecisionFeedbackEmpirical => "decision_feedback_empirical",
            CurveId::BurnashevQstar => "burnashev_qstar",
            CurveId::YiNonadaptive => "yi_nonadaptive",
            CurveId::YiAdaptive => "yi_adaptive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            CurveId::RandomCoding,
            CurveId::DecisionFeedbackEmpirical,
            CurveId::BurnashevQstar,
            CurveId::YiNonadaptive,
            CurveId::YiAdaptive,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
    }
}

/// How much a curve point can be trusted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PointQuality {
    #[default]
    Exact,
    /// Empirical estimate with fewer than ten observed failures.
    Unreliable,
    /// No failures observed; the exponent is a lower bound from the upper
    /// confidence limit of the error rate.
    LowerBound,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub rate: f64,
    pub exponent: f64,
    pub quality: PointQuality,
}

impl RatePoint {
    pub fn exact(rate: f64, exponent: f64) -> Self {
        RatePoint {
            rate,
            exponent,
            quality: PointQuality::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveMeta {
    pub model: NoiseModel,
    pub kappa: Kappa,
    pub q_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentCurve {
    pub id: CurveId,
    pub points: Vec<RatePoint>,
    pub meta: CurveMeta,
}

impl ExponentCurve {
    /// Exponent at the first point whose rate equals `r` (within `1e-12`).
    pub fn at(&self, r: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| (p.rate - r).abs() < 1e-12)
            .map(|p| p.exponent)
    }
}

/// Analytic curves (a), (c), (d), (e) on `rate_grid`, plus the empirical curve
/// (b) when one is supplied.
pub fn curve_bundle(
    model: &NoiseModel,
    kappa: Kappa,
    rate_grid: &[f64],
    empirical: Option<ExponentCurve>,
) -> Result<Vec<ExponentCurve>> {
    let mut grid = rate_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    for &r in &grid {
        check_domain("R", r, r >= 0.0, "[0, inf)")?;
    }
    let opt = optimal_q(model, kappa);
    let p_star = model.eval(opt.q);
    let meta = CurveMeta {
        model: model.clone(),
        kappa,
        q_star: opt.q,
    };
    let build = |id: CurveId, f: &dyn Fn(f64) -> Result<f64>| -> Result<ExponentCurve> {
        let points = grid
            .iter()
            .map(|&r| Ok(RatePoint::exact(r, f(r)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExponentCurve {
            id,
            points,
            meta: meta.clone(),
        })
    };
    let c1_p0 = c1(model.p0())?;
    let mut curves = vec![build(CurveId::RandomCoding, &|r| {
        random_coding_exponent(r, opt.q, p_star, kappa)
    })?];
    if let Some(mut b) = empirical {
        b.points.sort_by(|x, y| x.rate.total_cmp(&y.rate));
        curves.push(b);
    }
    curves.push(build(CurveId::BurnashevQstar, &|r| burnashev_exponent(r, p_star))?);
    curves.push(build(CurveId::YiNonadaptive, &|r| {
        Ok(validation_line(r, c1_p0, opt.rate))
    })?);
    curves.push(build(CurveId::YiAdaptive, &|r| yi_adaptive_exponent(r, model))?);
    Ok(curves)
}

/// Formats a float the way every CSV in this crate does: six decimals, fixed
/// point, `inf` for unbounded values.
pub fn fmt_fixed6(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.6}")
    }
}

/// Serialises curves as `curve_id,R,E` rows.
pub fn curves_to_csv(curves: &[ExponentCurve]) -> String {
    let mut out = String::from("curve_id,R,E\n");
    for c in curves {
        for p in &c.points {
            let _ = writeln!(
                out,
                "{},{},{}",
                c.id.as_str(),
                fmt_fixed6(p.rate),
                fmt_fixed6(p.exponent)
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn linear_model() -> NoiseModel {
        NoiseModel::linear(0.1, 0.45).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn entropy_values() {
        close(binary_entropy(0.0).unwrap(), 0.0, 0.0);
        close(binary_entropy(0.5).unwrap(), 1.0, 1e-15);
        close(binary_entropy(0.1).unwrap(), 0.46899, 1e-5);
        assert!(binary_entropy(1.1).is_err());
        assert!(binary_entropy(-0.1).is_err());
    }

    #[test]
    fn mutual_info_values() {
        close(mutual_info(0.5, 0.1).unwrap(), 0.53101, 1e-5);
        close(mutual_info(0.3, 0.1).unwrap(), 0.4559, 1e-4);
        close(mutual_info(0.27, 0.5).unwrap(), 0.0, 1e-15);
        assert!(mutual_info(0.3, 0.6).is_err());
    }

    #[test]
    fn capacity_and_c1_values() {
        close(capacity(0.0).unwrap(), 1.0, 0.0);
        close(capacity(0.5).unwrap(), 0.0, 0.0);
        close(capacity(0.1).unwrap(), 0.53101, 1e-5);
        close(c1(0.5).unwrap(), 0.0, 0.0);
        close(c1(0.25).unwrap(), 0.79248, 1e-5);
        close(c1(0.1).unwrap(), 2.5359, 1e-4);
        assert!(c1(0.0).unwrap().is_infinite());
        assert!(c1(0.7).is_err());
    }

    #[test]
    fn e0_values() {
        close(gallager_e0(0.0, 0.3, 0.2).unwrap(), 0.0, 1e-15);
        close(gallager_e0(0.7, 0.3, 0.5).unwrap(), 0.0, 1e-15);
        let closed = 1.0 - (1.0 + 2.0 * 0.09f64.sqrt()).log2();
        close(gallager_e0(1.0, 0.5, 0.1).unwrap(), closed, 1e-12);
        close(gallager_e0(1.0, 0.5, 0.1).unwrap(), 0.32193, 1e-4);
        assert!(gallager_e0(1.5, 0.5, 0.1).is_err());
        assert!(gallager_e0(0.5, 0.0, 0.1).is_err());
    }

    #[test]
    fn e0_slope_at_origin_is_mutual_info() {
        for &(q, p) in &[(0.5, 0.1), (0.3, 0.2), (0.15, 0.205)] {
            let rho = 1e-4;
            let slope = gallager_e0(rho, q, p).unwrap() / rho;
            let i = mutual_info(q, p).unwrap();
            assert!((slope - i).abs() / i < 1e-3, "q={q} p={p}: {slope} vs {i}");
        }
    }

    #[test]
    fn random_coding_endpoints() {
        for kappa in [Kappa::One, Kappa::Half] {
            let i = mutual_info(0.5, 0.1).unwrap();
            let at_i = random_coding_exponent(kappa.value() * i, 0.5, 0.1, kappa).unwrap();
            close(at_i, 0.0, 1e-6);
            let at_zero = random_coding_exponent(0.0, 0.5, 0.1, kappa).unwrap();
            close(at_zero, gallager_e0(1.0, 0.5, 0.1).unwrap(), 1e-12);
        }
    }

    /// Plain 1e-4 grid scan over rho, independent of the refinement path.
    fn grid_oracle(r: f64, q: f64, p: f64, kappa: f64) -> f64 {
        (0..=10_000)
            .map(|k| {
                let rho = k as f64 * 1e-4;
                gallager_e0(rho, q, p).unwrap() - rho * r / kappa
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn random_coding_matches_grid_oracle() {
        let oracle = grid_oracle(0.25, 0.5, 0.1, 1.0);
        // Frozen from the grid oracle above.
        close(oracle, 0.081958, 1e-6);
        close(random_coding_exponent(0.25, 0.5, 0.1, Kappa::One).unwrap(), oracle, 1e-7);
        for &(r, q, p) in &[(0.05, 0.3, 0.2), (0.1, 0.15, 0.205), (0.0, 0.4, 0.01)] {
            let got = random_coding_exponent(r, q, p, Kappa::Half).unwrap();
            close(got, grid_oracle(r, q, p, 0.5), 1e-7);
        }
    }

    #[test]
    fn optimal_q_constant_and_clean() {
        let m = NoiseModel::constant(0.11).unwrap();
        for kappa in [Kappa::One, Kappa::Half] {
            let o = optimal_q(&m, kappa);
            assert_eq!(o.q, 0.5);
            close(o.rate, kappa.value() * capacity(0.11).unwrap(), 1e-12);
        }
        let clean = NoiseModel::constant(0.0).unwrap();
        let o = optimal_q(&clean, Kappa::One);
        assert_eq!(o.q, 0.5);
        close(o.rate, 1.0, 1e-12);
    }

    #[test]
    fn optimal_q_linear_regression() {
        // Exhaustive 1e-4 grid oracle over q, evaluated independently.
        let m = linear_model();
        let (mut qb, mut ib) = (0.0, f64::NEG_INFINITY);
        for k in 1..=5000 {
            let q = k as f64 / 10_000.0;
            let i = mutual_info(q, 0.1 + 0.7 * q).unwrap();
            if i >= ib {
                qb = q;
                ib = i;
            }
        }
        close(qb, 0.15, 1e-12);
        close(ib, 0.141384, 1e-6);
        let o = optimal_q(&m, Kappa::One);
        close(o.q, 0.15, 1e-4);
        assert!(o.rate >= ib - 1e-12);
        close(o.rate, 0.141384, 1e-6);
        let half = optimal_q(&m, Kappa::Half);
        assert_eq!(half.q, o.q);
        assert_eq!(half.rate, 0.5 * o.rate);
    }

    #[test]
    fn adaptive_rates() {
        close(max_rate_adaptive(&NoiseModel::constant(0.0).unwrap()), 1.0, 0.0);
        close(max_rate_adaptive(&linear_model()), 0.53101, 1e-5);
        close(max_rate_adaptive(&NoiseModel::constant(0.5).unwrap()), 0.0, 0.0);
    }

    #[test]
    fn validation_lines() {
        let m = linear_model();
        let i = optimal_q(&m, Kappa::One).rate;
        let c1_01 = c1(0.1).unwrap();
        close(yi_nonadaptive_exponent(0.0, &m, Kappa::One).unwrap(), c1_01, 1e-12);
        close(yi_nonadaptive_exponent(i, &m, Kappa::One).unwrap(), 0.0, 0.0);
        close(yi_nonadaptive_exponent(i / 2.0, &m, Kappa::One).unwrap(), 1.26795, 1e-4);
        close(yi_nonadaptive_exponent(0.9, &m, Kappa::One).unwrap(), 0.0, 0.0);
        close(yi_adaptive_exponent(0.0, &m).unwrap(), c1_01, 1e-12);
        close(yi_adaptive_exponent(capacity(0.1).unwrap(), &m).unwrap(), 0.0, 0.0);
        close(yi_adaptive_exponent(0.25, &m).unwrap(), 1.3420, 1e-3);
        close(burnashev_exponent(0.0, 0.1).unwrap(), c1_01, 1e-12);
        close(burnashev_exponent(capacity(0.1).unwrap(), 0.1).unwrap(), 0.0, 0.0);
        close(burnashev_exponent(0.25, 0.1).unwrap(), 1.3420, 1e-3);
        let clean = NoiseModel::constant(0.0).unwrap();
        assert!(yi_adaptive_exponent(0.5, &clean).unwrap().is_infinite());
        assert_eq!(yi_adaptive_exponent(1.0, &clean).unwrap(), 0.0);
    }

    #[test]
    fn bundle_intercepts_and_coincidence() {
        let m = linear_model();
        let curves = curve_bundle(&m, Kappa::One, &[0.0], None).unwrap();
        assert_eq!(curves.len(), 4);
        let p_star = m.eval(optimal_q(&m, Kappa::One).q);
        let o = optimal_q(&m, Kappa::One);
        close(curves[0].points[0].exponent, gallager_e0(1.0, o.q, p_star).unwrap(), 1e-12);
        close(curves[1].points[0].exponent, c1(p_star).unwrap(), 1e-12);
        close(curves[2].points[0].exponent, c1(0.1).unwrap(), 1e-12);
        close(curves[3].points[0].exponent, c1(0.1).unwrap(), 1e-12);

        let flat = NoiseModel::constant(0.11).unwrap();
        let grid: Vec<f64> = (0..20).map(|k| k as f64 * 0.025).collect();
        let cs = curve_bundle(&flat, Kappa::One, &grid, None).unwrap();
        for (d, e) in cs[2].points.iter().zip(&cs[3].points) {
            close(d.exponent, e.exponent, 1e-12);
        }

        let grid: Vec<f64> = (0..50).map(|k| k as f64 * 0.53 / 49.0).collect();
        let cs = curve_bundle(&m, Kappa::One, &grid, None).unwrap();
        for (d, e) in cs[2].points.iter().zip(&cs[3].points) {
            assert!(e.exponent >= d.exponent && d.exponent >= 0.0);
        }
    }

    #[test]
    fn csv_format() {
        let m = NoiseModel::constant(0.0).unwrap();
        let cs = curve_bundle(&m, Kappa::One, &[0.0], None).unwrap();
        let csv = curves_to_csv(&cs);
        assert!(csv.starts_with("curve_id,R,E\n"));
        assert!(csv.contains("yi_adaptive,0.000000,inf\n"));
        assert_eq!(curves_to_csv(&[]), "curve_id,R,E\n");
    }

    proptest! {
        #[test]
        fn mutual_info_symmetric(q in 0.0..1.0f64, p in 0.0..0.5f64) {
            let a = mutual_info(q, p).unwrap();
            let b = mutual_info(1.0 - q, p).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn capacity_strictly_decreasing(a in 0.0..0.5f64, b in 0.0..0.5f64) {
            prop_assume!((a - b).abs() > 1e-6);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(capacity(lo).unwrap() > capacity(hi).unwrap());
        }

        #[test]
        fn random_coding_monotone_convex(q in 0.05..0.95f64, p in 0.0..0.45f64, r in 0.0..0.5f64) {
            let d = 0.02;
            let e = |x: f64| random_coding_exponent(x, q, p, Kappa::One).unwrap();
            let (e0, e1, e2) = (e(r), e(r + d), e(r + 2.0 * d));
            prop_assert!(e1 <= e0 + 1e-9);
            prop_assert!(e2 <= e1 + 1e-9);
            prop_assert!(e0 + e2 >= 2.0 * e1 - 1e-6);
            let i = mutual_info(q, p).unwrap();
            prop_assert!(e(i + 1e-3) <= 1e-6);
            if r < i - 1e-3 {
                prop_assert!(e0 > 0.0);
            }
        }
    }
}
