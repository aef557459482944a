//! Search strategies run against simulated targets, and the Monte Carlo
//! harness around them.

pub mod decode;
mod montecarlo;
mod search;

use rand::Rng;

use crate::coding::ArcSet;
use crate::error::{Error, Result};
use crate::geometry::{advance, CirclePoint, DEFAULT_TABLE_CAP};
use crate::infotheory::{optimal_q, Kappa};
use crate::noise::{sample_bsc, NoiseModel};

pub use decode::{forney_decode, ml_decode, Decision, ForneyOutcome};
pub use montecarlo::{empirical_forney_curve, monte_carlo, wilson_interval, SweepStats, SWEEP_CSV_HEADER};
pub use search::{Searcher, StagePlan};

/// Whether the searcher knows the target velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VelocityMode {
    Known,
    Unknown,
}

impl VelocityMode {
    pub fn kappa(self) -> Kappa {
        match self {
            VelocityMode::Known => Kappa::One,
            VelocityMode::Unknown => Kappa::Half,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VelocityMode::Known => "known",
            VelocityMode::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "known" => Some(VelocityMode::Known),
            "unknown" => Some(VelocityMode::Unknown),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    NonAdaptive,
    Forney,
    YamamotoItoh,
    TwoPhase,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::NonAdaptive,
        Strategy::Forney,
        Strategy::YamamotoItoh,
        Strategy::TwoPhase,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::NonAdaptive => "nonadaptive",
            Strategy::Forney => "forney",
            Strategy::YamamotoItoh => "yi",
            Strategy::TwoPhase => "two_phase",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.as_str() == s)
    }
}

/// Default retry cap for the restarting strategies.
pub const DEFAULT_MAX_RETRIES: u32 = 32;
/// Default validation fraction of the two-phase scheme.
pub const DEFAULT_TWO_PHASE_LAMBDA: f64 = 0.8;

/// Everything that defines one simulated search problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchParams {
    /// Queries per (search part of an) attempt.
    pub n: usize,
    pub delta: f64,
    /// Rate the resolution was derived from, if any.
    pub rate: Option<f64>,
    pub velocity: VelocityMode,
    /// Slack added to `q*` for the channel assumed by the decoder.
    pub eps_slack: f64,
    /// Forney threshold, bits per query.
    pub threshold: f64,
    /// Validation fraction; `None` picks the strategy default.
    pub lambda: Option<f64>,
    /// Phase-1 resolution of the two-phase scheme.
    pub alpha: f64,
    /// Typicality slack; `None` means `(1/2 - p[delta]) / 4`.
    pub eta: Option<f64>,
    pub max_retries: u32,
    pub model: NoiseModel,
    pub seed: u64,
    /// Degrade probes whose set is smaller than `q* + eps` to the assumed
    /// channel by flipping extra bits.
    pub artificial_noise: bool,
    /// Entry cap for the unknown-velocity trajectory table.
    pub table_cap: usize,
    /// Sweep grid for the trajectory table; `None` means `(4M, 4MN)`.
    pub grid: Option<(u64, u64)>,
}

impl SearchParams {
    pub fn new(model: NoiseModel, n: usize, delta: f64) -> Self {
        SearchParams {
            n,
            delta,
            rate: None,
            velocity: VelocityMode::Known,
            eps_slack: 0.02,
            threshold: 0.0,
            lambda: None,
            alpha: 0.1,
            eta: None,
            max_retries: DEFAULT_MAX_RETRIES,
            model,
            seed: 0,
            artificial_noise: false,
            table_cap: DEFAULT_TABLE_CAP,
            grid: None,
        }
    }

    /// Parameters at rate `rate`, with `delta = 2^(-N R)`.
    pub fn from_rate(model: NoiseModel, n: usize, rate: f64) -> Self {
        let mut p = Self::new(model, n, (-(n as f64) * rate).exp2());
        p.rate = Some(rate);
        p
    }

    pub fn with_velocity(mut self, v: VelocityMode) -> Self {
        self.velocity = v;
        self
    }

    /// The rate, either as given or as `log2(1/delta) / N`.
    pub fn effective_rate(&self) -> f64 {
        self.rate.unwrap_or_else(|| -self.delta.log2() / self.n as f64)
    }

    /// Noise level of a probe of measure `delta`.
    pub fn p_delta(&self) -> f64 {
        self.model.eval(self.delta)
    }

    pub fn eta_value(&self) -> f64 {
        self.eta.unwrap_or((0.5 - self.p_delta()) / 4.0)
    }

    /// Validation fraction used by `strategy`; zero for strategies without one.
    pub fn lambda_for(&self, strategy: Strategy) -> f64 {
        match (strategy, self.lambda) {
            (Strategy::YamamotoItoh | Strategy::TwoPhase, Some(l)) => l,
            (Strategy::YamamotoItoh, None) => {
                optimal_q(&self.model, self.velocity.kappa()).rate / self.effective_rate() - 1.0
            }
            (Strategy::TwoPhase, None) => DEFAULT_TWO_PHASE_LAMBDA,
            _ => 0.0,
        }
    }

    /// Checks every parameter that `strategy` depends on.
    pub fn validate(&self, strategy: Strategy) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("N", "must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::param("delta", format!("{} is outside (0, 1)", self.delta)));
        }
        if let Some(r) = self.rate {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::param("R", format!("{r} must be positive")));
            }
        }
        if !(0.0..0.5).contains(&self.eps_slack) {
            return Err(Error::param("eps_slack", format!("{} is outside [0, 1/2)", self.eps_slack)));
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::param("T", format!("{} must be a non-negative number", self.threshold)));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::param("lambda", format!("{l} must be non-negative")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::param("alpha", format!("{} is outside (0, 1/2)", self.alpha)));
        }
        if self.table_cap == 0 {
            return Err(Error::param("table_cap", "must be positive"));
        }
        match strategy {
            Strategy::NonAdaptive => {}
            Strategy::Forney => {
                self.check_retries()?;
                let q = optimal_q(&self.model, self.velocity.kappa()).q;
                if self.model.eval(q + self.eps_slack) >= 0.5 {
                    return Err(Error::param("model", "assumed channel has crossover 1/2"));
                }
            }
            Strategy::YamamotoItoh => {
                self.check_retries()?;
                self.check_eta()?;
                let l = self.lambda_for(strategy);
                if l.is_nan() || l <= 0.0 {
                    return Err(Error::param(
                        "lambda",
                        format!("{l} must be positive; the rate may exceed the maximal targeting rate"),
                    ));
                }
                if (l * self.n as f64).round() < 1.0 {
                    return Err(Error::param("lambda", "fewer than one validation round"));
                }
            }
            Strategy::TwoPhase => {
                self.check_retries()?;
                self.check_eta()?;
                if self.velocity == VelocityMode::Unknown {
                    return Err(Error::param("kappa_mode", "two-phase search needs a known velocity"));
                }
                let l = self.lambda_for(strategy);
                if !(l > 0.0 && l < 1.0) {
                    return Err(Error::param("lambda", format!("{l} is outside (0, 1)")));
                }
                let (l1, l2, l3) = two_phase_lengths(self.n, l);
                if l1 < 1 || l2 < 1 || l3 < 1 {
                    return Err(Error::param(
                        "N",
                        format!("phase lengths {l1}, {l2}, {l3} must all be positive"),
                    ));
                }
                if self.delta >= self.alpha {
                    return Err(Error::param("delta", "must be finer than alpha"));
                }
            }
        }
        Ok(())
    }

    fn check_retries(&self) -> Result<()> {
        if self.max_retries == 0 {
            return Err(Error::param("max_retries", "must be at least 1"));
        }
        Ok(())
    }

    fn check_eta(&self) -> Result<()> {
        let hi = 0.5 - self.p_delta();
        let eta = self.eta_value();
        if !(eta > 0.0 && eta < hi) {
            return Err(Error::param("eta", format!("{eta} is outside (0, {hi})")));
        }
        Ok(())
    }
}

/// Phase lengths `(coarse, fine, validation)` of the two-phase scheme; the
/// three always sum to `n` when all are non-negative.
pub fn two_phase_lengths(n: usize, lambda: f64) -> (i64, i64, i64) {
    let l1 = (n as f64).log2().round() as i64;
    let l2 = (lambda * n as f64 - l1 as f64).round() as i64;
    (l1, l2, n as i64 - l1 - l2)
}

/// A target moving at constant velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub w0: CirclePoint,
    pub v: CirclePoint,
}

impl Target {
    pub fn new(w0: f64, v: f64) -> Self {
        Target {
            w0: CirclePoint::new(w0),
            v: CirclePoint::new(v),
        }
    }

    pub fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Target::new(rng.random(), rng.random())
    }

    pub fn at(&self, t: u64) -> CirclePoint {
        advance(self.w0, self.v, t)
    }
}

/// Result of one simulated search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub w_hat: CirclePoint,
    pub v_hat: CirclePoint,
    pub w_true: CirclePoint,
    pub v_true: CirclePoint,
    /// Position and velocity both within `delta`.
    pub success: bool,
    /// Position within `delta` and velocity within `delta / N`.
    pub success_strict: bool,
    pub tau: u64,
    pub attempts: u32,
    pub retries: u32,
    /// Rejected attempts, including a rejected final attempt.
    pub erasures: u32,
    /// The retry cap was hit and the fallback estimate was used.
    pub capped: bool,
    /// Probes whose set measure exceeded `q* + eps`.
    pub optimistic_columns: u32,
    /// Largest absolute measure among the fine-phase probes (two-phase only).
    pub fine_max_measure: f64,
}

/// One noisy probe: `X = 1{w in s} xor flip`, passed through a BSC with
/// crossover `p[|s|]`. An empty set is answered with `p0`.
pub fn run_query<R: Rng + ?Sized>(w: CirclePoint, s: &ArcSet, flip: bool, model: &NoiseModel, rng: &mut R) -> bool {
    let p = if s.is_empty() { model.p0() } else { model.eval(s.measure()) };
    sample_bsc(p, s.contains(w) ^ flip, rng)
}

/// Verdict of a Yamamoto-Itoh validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validation {
    pub accepted: bool,
    pub ones: usize,
    pub rounds: usize,
}

/// Probes `window` (which moves with `window_velocity`) for `rounds` steps,
/// starting at time `start + 1`, and accepts iff the fraction of ones is at
/// least `1 - p[delta] - eta`, `delta` being the window measure.
#[allow(clippy::too_many_arguments)]
pub fn yi_validate<R: Rng + ?Sized>(
    window: &ArcSet,
    window_velocity: CirclePoint,
    target: &Target,
    start: u64,
    rounds: usize,
    model: &NoiseModel,
    eta: f64,
    rng: &mut R,
) -> Result<Validation> {
    if rounds == 0 {
        return Err(Error::param("rounds", "must be at least 1"));
    }
    let delta = window.measure();
    let p_delta = model.eval(delta);
    if !(eta > 0.0 && eta < 0.5 - p_delta) {
        return Err(Error::param("eta", format!("{eta} is outside (0, {})", 0.5 - p_delta)));
    }
    let mut ones = 0;
    for r in 1..=rounds as u64 {
        let probe = window.rotate(window_velocity.value() * r as f64);
        if run_query(target.at(start + r), &probe, false, model, rng) {
            ones += 1;
        }
    }
    let accepted = ones as f64 >= (1.0 - p_delta - eta) * rounds as f64;
    Ok(Validation { accepted, ones, rounds })
}
