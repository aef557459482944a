use rayon::prelude::*;

use super::search::Searcher;
use super::{SearchParams, Strategy, TrialOutcome, VelocityMode};
use crate::error::{Error, Result};
use crate::infotheory::{fmt_fixed6, optimal_q, CurveId, CurveMeta, ExponentCurve, PointQuality, RatePoint};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

pub const SWEEP_CSV_HEADER: &str = "strategy,kappa_mode,N,R,delta,T,lambda,alpha,trials,failures,eps_hat,ci_lo,ci_hi,mean_tau,sd_tau,retries_mean,erasure_rate,seed";

/// Wilson score interval at 95% for `k` successes out of `n`.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // Clamp so the interval always contains the point estimate despite rounding.
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

/// Aggregate of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepStats {
    pub strategy: Strategy,
    pub velocity: VelocityMode,
    pub n: usize,
    pub rate: f64,
    pub delta: f64,
    pub threshold: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub trials: u64,
    pub failures: u64,
    pub eps_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub mean_tau: f64,
    pub sd_tau: f64,
    pub retries_mean: f64,
    /// Rejected attempts over all attempts.
    pub erasure_rate: f64,
    pub seed: u64,
    /// Failures under the stricter `delta / N` velocity criterion.
    pub strict_failures: u64,
    pub capped: u64,
    pub attempts: u64,
    pub erasures: u64,
    /// Probes noisier than the decoder assumed, over all probes of the
    /// non-adaptive blocks.
    pub optimistic_columns: u64,
    /// Queries per attempt.
    pub attempt_len: u64,
}

impl SweepStats {
    pub fn from_outcomes(searcher: &Searcher, seed: u64, outcomes: &[TrialOutcome]) -> Self {
        let p = searcher.params();
        let trials = outcomes.len() as u64;
        let failures = outcomes.iter().filter(|o| !o.success).count() as u64;
        let (ci_lo, ci_hi) = wilson_interval(failures, trials);
        let taus: Vec<f64> = outcomes.iter().map(|o| o.tau as f64).collect();
        let mean_tau = taus.iter().sum::<f64>() / trials as f64;
        let sd_tau = if trials > 1 {
            (taus.iter().map(|t| (t - mean_tau).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt()
        } else {
            0.0
        };
        let attempts: u64 = outcomes.iter().map(|o| u64::from(o.attempts)).sum();
        let erasures: u64 = outcomes.iter().map(|o| u64::from(o.erasures)).sum();
        SweepStats {
            strategy: searcher.strategy(),
            velocity: p.velocity,
            n: p.n,
            rate: p.effective_rate(),
            delta: p.delta,
            threshold: p.threshold,
            lambda: searcher.lambda(),
            alpha: p.alpha,
            trials,
            failures,
            eps_hat: failures as f64 / trials as f64,
            ci_lo,
            ci_hi,
            mean_tau,
            sd_tau,
            retries_mean: outcomes.iter().map(|o| f64::from(o.retries)).sum::<f64>() / trials as f64,
            erasure_rate: erasures as f64 / attempts as f64,
            seed,
            strict_failures: outcomes.iter().filter(|o| !o.success_strict).count() as u64,
            capped: outcomes.iter().filter(|o| o.capped).count() as u64,
            attempts,
            erasures,
            optimistic_columns: outcomes.iter().map(|o| u64::from(o.optimistic_columns)).sum(),
            attempt_len: searcher.attempt_len(),
        }
    }

    /// One CSV row in the column order of [`SWEEP_CSV_HEADER`].
    pub fn to_csv_row(&self) -> String {
        let f = fmt_fixed6;
        [
            self.strategy.as_str().to_string(),
            self.velocity.as_str().to_string(),
            self.n.to_string(),
            f(self.rate),
            f(self.delta),
            f(self.threshold),
            f(self.lambda),
            f(self.alpha),
            self.trials.to_string(),
            self.failures.to_string(),
            f(self.eps_hat),
            f(self.ci_lo),
            f(self.ci_hi),
            f(self.mean_tau),
            f(self.sd_tau),
            f(self.retries_mean),
            f(self.erasure_rate),
            self.seed.to_string(),
        ]
        .join(",")
    }

    /// Standard error of the mean search time.
    pub fn tau_standard_error(&self) -> f64 {
        self.sd_tau / (self.trials as f64).sqrt()
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::param("workers", e.to_string()))
}

/// Runs `trials` independent searches on fresh targets and aggregates them.
///
/// Trial `i` draws everything from streams keyed by `(master, i)`, so the
/// result does not depend on `workers` (0 means one per core).
pub fn monte_carlo(
    strategy: Strategy,
    params: &SearchParams,
    trials: u64,
    master: u64,
    workers: usize,
) -> Result<SweepStats> {
    let searcher = Searcher::new(strategy, params.clone())?;
    run_trials(&searcher, trials, master, workers)
}

/// [`monte_carlo`] with a prebuilt searcher.
pub fn run_trials(searcher: &Searcher, trials: u64, master: u64, workers: usize) -> Result<SweepStats> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let outcomes: Vec<TrialOutcome> = pool(workers)?.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| searcher.trial(master, t))
            .collect::<Result<_>>()
    })?;
    Ok(SweepStats::from_outcomes(searcher, master, &outcomes))
}

/// Empirical decision-feedback curve: for every threshold in `thresholds`,
/// the error rate among declared single attempts and the erasure rate, as
/// the point `(R (1 - erasure), -log2(error) / N)`.
///
/// All thresholds are scored on the same trials. A point with no errors
/// reports the bound from the upper confidence limit instead of infinity.
pub fn empirical_forney_curve(
    params: &SearchParams,
    thresholds: &[f64],
    trials: u64,
    master: u64,
    workers: usize,
) -> Result<ExponentCurve> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    for &t in thresholds {
        if t.is_nan() || t < 0.0 {
            return Err(Error::param("T", format!("{t} must be non-negative")));
        }
    }
    let searcher = Searcher::new(Strategy::Forney, params.clone())?;
    let profiles: Vec<_> = pool(workers)?.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| searcher.forney_profile(master, t))
            .collect::<Result<Vec<_>>>()
    })?;
    let n = params.n as f64;
    let rate = params.effective_rate();
    let points = thresholds
        .iter()
        .map(|&t| {
            let (mut declared, mut errors) = (0u64, 0u64);
            for p in &profiles {
                if p.log_ratio.is_some_and(|r| r >= n * t) {
                    declared += 1;
                    errors += u64::from(!p.ml_success);
                }
            }
            let erasure = 1.0 - declared as f64 / trials as f64;
            let (exponent, quality) = if errors == 0 {
                let hi = wilson_interval(0, declared).1;
                (-hi.log2() / n, PointQuality::LowerBound)
            } else {
                let eps = errors as f64 / declared as f64;
                let q = if errors < 10 { PointQuality::Unreliable } else { PointQuality::Exact };
                (-eps.log2() / n, q)
            };
            RatePoint {
                rate: rate * (1.0 - erasure),
                exponent,
                quality,
            }
        })
        .collect();
    let kappa = params.velocity.kappa();
    Ok(ExponentCurve {
        id: CurveId::DecisionFeedbackEmpirical,
        points,
        meta: CurveMeta {
            model: params.model.clone(),
            kappa,
            q_star: optimal_q(&params.model, kappa).q,
        },
    })
}
