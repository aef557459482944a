use std::sync::Arc;

use rand::Rng;

use super::decode::{forney_log_ratio, ml_decide, row_distances, table_distances, Decision};
use super::{two_phase_lengths, yi_validate, SearchParams, Strategy, Target, TrialOutcome, VelocityMode};
use crate::coding::{ArcSet, Codebook, Dither};
use crate::error::Result;
use crate::geometry::{
    advance, bin_index, cyclic_distance, default_grid, enumerate_trajectories, partition_size, CirclePoint, TrajectoryTable,
};
use crate::infotheory::optimal_q;
use crate::noise::{sample_bsc, NoiseModel};
use crate::seed::{self, StreamRng};

/// One non-adaptive block of queries.
#[derive(Debug, Clone, PartialEq)]
pub struct StagePlan {
    pub len: usize,
    pub m: usize,
    /// Codebook input mass.
    pub q: f64,
    /// Crossover of the channel the decoder assumes.
    pub p_assumed: f64,
    /// `min(q + eps, 1/2)`: probes of larger (relative) measure are noisier
    /// than assumed.
    pub measure_limit: f64,
    /// Width of the zoom window the block runs in; 1 for the whole circle.
    pub width: f64,
}

impl StagePlan {
    fn new(len: usize, m: usize, frame_model: &NoiseModel, q: f64, eps: f64, width: f64) -> Self {
        let measure_limit = (q + eps).min(0.5);
        StagePlan {
            len,
            m,
            q,
            p_assumed: frame_model.eval(measure_limit),
            measure_limit,
            width,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Frame {
    Circle,
    /// Window `[start + v n, start + v n + width)` at step `n` of the block.
    Zoom { start: f64, width: f64 },
}

struct BlockRun {
    distances: Vec<u32>,
    dither: Dither,
    optimistic: u32,
    max_measure: f64,
}

/// The noiseless answer to the query at step `n` of a block, with the
/// measures of the normalised set.
struct Probe {
    x: bool,
    /// Absolute measure, at most 1/2.
    measure: f64,
    /// Measure inside the block's frame, at most 1/2.
    rel_measure: f64,
}

/// Answers the step-`n` query of a block without materialising its arc set.
///
/// The set is the union of the column's one-rows, rotated by the dither and,
/// in a zoom frame, shrunk into the window; a set of measure above 1/2 is
/// replaced by its complement and the answer flipped. Both operations leave
/// the answer for a target inside the frame equal to its row's bit, and a
/// target outside a zoom window reads as the flip.
fn probe(cb: &Codebook, weight: usize, dither: &Dither, frame: Frame, target: &Target, t0: u64, n: usize) -> Probe {
    let s = weight as f64 / cb.rows() as f64;
    let flip = s > 0.5;
    let rel_measure = if flip { 1.0 - s } else { s };
    let w = target.at(t0 + n as u64).value();
    let (u, width) = match frame {
        Frame::Circle => (Some(w), 1.0),
        Frame::Zoom { start, width } => {
            let d = CirclePoint::new(w - start - target.v.value() * n as f64).value();
            ((d < width).then(|| d / width), width)
        }
    };
    let x = match u {
        Some(u) => cb.get(bin_index(CirclePoint::new(u - dither.offset(n as u64)), cb.rows()), n - 1),
        None => flip,
    };
    Probe {
        x,
        measure: width * rel_measure,
        rel_measure,
    }
}

/// Decoded estimate at the start of a block.
#[derive(Debug, Clone, Copy)]
struct Estimate {
    w: CirclePoint,
    v: CirclePoint,
}

/// Result of one attempt, before the accept/reject verdict is applied.
struct Attempt {
    /// Estimated position at the end of the attempt.
    w_end: CirclePoint,
    v_hat: CirclePoint,
    accepted: bool,
    len: u64,
    optimistic: u32,
    fine_max_measure: f64,
}

/// Everything for one single-block attempt that a Forney threshold sweep
/// needs: whether the ML estimate is a success and the log-likelihood ratio
/// of the ML candidate (`None` on a tie).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForneyProfile {
    pub ml_success: bool,
    pub log_ratio: Option<f64>,
}

/// A strategy bound to its parameters, with all per-run precomputation done.
///
/// The unknown-velocity trajectory table is built once here and shared by
/// every trial.
#[derive(Debug, Clone)]
pub struct Searcher {
    strategy: Strategy,
    params: SearchParams,
    lambda: f64,
    eta: f64,
    main: StagePlan,
    fine: Option<StagePlan>,
    rounds: usize,
    table: Option<Arc<TrajectoryTable>>,
}

impl Searcher {
    pub fn new(strategy: Strategy, params: SearchParams) -> Result<Self> {
        params.validate(strategy)?;
        let lambda = params.lambda_for(strategy);
        let eta = params.eta_value();
        let model = &params.model;
        let kappa = params.velocity.kappa();
        let q_star = optimal_q(model, kappa).q;
        let n = params.n;
        let (main, fine, rounds) = match strategy {
            Strategy::TwoPhase => {
                let (l1, l2, l3) = two_phase_lengths(n, lambda);
                let (l1, l2) = (l1 as usize, l2 as usize);
                let coarse = StagePlan::new(l1, partition_size(l1, params.alpha), model, q_star, params.eps_slack, 1.0);
                let zoomed = model.zoomed(params.alpha)?;
                let q2 = optimal_q(&zoomed, kappa).q;
                let fine = StagePlan::new(
                    l2,
                    partition_size(l2, params.delta / params.alpha),
                    &zoomed,
                    q2,
                    params.eps_slack,
                    params.alpha,
                );
                (coarse, Some(fine), l3 as usize)
            }
            _ => {
                let plan = StagePlan::new(n, partition_size(n, params.delta), model, q_star, params.eps_slack, 1.0);
                let rounds = if strategy == Strategy::YamamotoItoh {
                    (lambda * n as f64).round() as usize
                } else {
                    0
                };
                (plan, None, rounds)
            }
        };
        if let Some(f) = &fine {
            Codebook::check_size(f.m, f.len)?;
        }
        Codebook::check_size(main.m, main.len)?;
        let table = match params.velocity {
            VelocityMode::Known => None,
            VelocityMode::Unknown => {
                let (gw, gv) = params.grid.unwrap_or_else(|| default_grid(n, main.m));
                Some(Arc::new(enumerate_trajectories(n, main.m, gw, gv, params.table_cap)?))
            }
        };
        Ok(Searcher {
            strategy,
            params,
            lambda,
            eta,
            main,
            fine,
            rounds,
            table,
        })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn params(&self) -> &SearchParams {
        &self.params
    }

    /// Validation fraction in effect (0 when the strategy has none).
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// The single block, or the coarse block of the two-phase scheme.
    pub fn main_plan(&self) -> &StagePlan {
        &self.main
    }

    pub fn fine_plan(&self) -> Option<&StagePlan> {
        self.fine.as_ref()
    }

    pub fn validation_rounds(&self) -> usize {
        self.rounds
    }

    /// Number of candidates the decoder scores in the main block.
    pub fn candidates(&self) -> usize {
        self.table.as_ref().map_or(self.main.m, |t| t.len())
    }

    pub fn table(&self) -> Option<&TrajectoryTable> {
        self.table.as_deref()
    }

    /// Queries in one attempt.
    pub fn attempt_len(&self) -> u64 {
        (self.main.len + self.fine.as_ref().map_or(0, |f| f.len) + self.rounds) as u64
    }

    /// The target of trial `trial`, drawn uniformly.
    pub fn truth(&self, master: u64, trial: u64) -> Target {
        Target::draw(&mut seed::stream(master, "truth", &[trial]))
    }

    /// Runs trial `trial` against a uniformly drawn target.
    pub fn trial(&self, master: u64, trial: u64) -> Result<TrialOutcome> {
        self.run(self.truth(master, trial), master, trial)
    }

    /// Runs the strategy against `target`, restarting on rejection until an
    /// attempt is accepted or the retry cap is reached.
    pub fn run(&self, target: Target, master: u64, trial: u64) -> Result<TrialOutcome> {
        let max_attempts = match self.strategy {
            Strategy::NonAdaptive => 1,
            _ => self.params.max_retries + 1,
        };
        let mut tau = 0u64;
        let mut erasures = 0;
        let mut optimistic = 0;
        let mut fine_max: f64 = 0.0;
        let mut attempts = 0;
        let last = loop {
            let att = self.attempt(&target, tau, master, trial, attempts as u64)?;
            attempts += 1;
            tau += att.len;
            optimistic += att.optimistic;
            fine_max = fine_max.max(att.fine_max_measure);
            if !att.accepted {
                erasures += 1;
            }
            if att.accepted || attempts == max_attempts {
                break att;
            }
        };
        let w_true = target.at(tau);
        let delta = self.params.delta;
        let dw = cyclic_distance(last.w_end, w_true);
        let dv = cyclic_distance(last.v_hat, target.v);
        Ok(TrialOutcome {
            w_hat: last.w_end,
            v_hat: last.v_hat,
            w_true,
            v_true: target.v,
            success: dw.max(dv) <= delta,
            success_strict: dw <= delta && dv <= delta / self.params.n as f64,
            tau,
            attempts,
            retries: attempts - 1,
            erasures,
            capped: !last.accepted && self.strategy != Strategy::NonAdaptive,
            optimistic_columns: optimistic,
            fine_max_measure: fine_max,
        })
    }

    /// One single-block attempt decoded both ways, for threshold sweeps.
    pub fn forney_profile(&self, master: u64, trial: u64) -> Result<ForneyProfile> {
        let target = self.truth(master, trial);
        let mut noise = seed::stream(master, "noise", &[trial, 0]);
        let run = self.block(&self.main, Frame::Circle, &target, 0, master, &[trial, 0, 0], &mut noise)?;
        let ml = ml_decide(&run.distances)?;
        let est = self.estimate(&self.main, Frame::Circle, &run.dither, &target, ml);
        let w_end = advance(est.w, est.v, self.main.len as u64);
        let w_true = target.at(self.main.len as u64);
        let ml_success = cyclic_distance(w_end, w_true).max(cyclic_distance(est.v, target.v)) <= self.params.delta;
        Ok(ForneyProfile {
            ml_success,
            log_ratio: forney_log_ratio(&run.distances, self.main.len, self.main.p_assumed)?,
        })
    }

    fn attempt(&self, target: &Target, t0: u64, master: u64, trial: u64, a: u64) -> Result<Attempt> {
        let mut noise = seed::stream(master, "noise", &[trial, a]);
        let run = self.block(&self.main, Frame::Circle, target, t0, master, &[trial, a, 0], &mut noise)?;
        let ml = ml_decide(&run.distances)?;
        let est = self.estimate(&self.main, Frame::Circle, &run.dither, target, ml);
        let n1 = self.main.len as u64;
        let mut w_end = advance(est.w, est.v, n1);
        let mut optimistic = run.optimistic;
        let mut fine_max_measure = 0.0;
        let mut t = t0 + n1;
        let accepted = match self.strategy {
            Strategy::NonAdaptive => true,
            Strategy::Forney => {
                let lr = forney_log_ratio(&run.distances, self.main.len, self.main.p_assumed)?;
                lr.is_some_and(|r| r >= self.params.n as f64 * self.params.threshold)
            }
            Strategy::YamamotoItoh => self.validate(w_end, est.v, target, &mut t, &mut noise, &mut w_end)?,
            Strategy::TwoPhase => {
                let fine = self.fine.as_ref().expect("two-phase plan");
                let frame = Frame::Zoom {
                    start: w_end.value() - fine.width / 2.0,
                    width: fine.width,
                };
                let run2 = self.block(fine, frame, target, t, master, &[trial, a, 1], &mut noise)?;
                optimistic += run2.optimistic;
                fine_max_measure = run2.max_measure;
                let ml2 = ml_decide(&run2.distances)?;
                let est2 = self.estimate(fine, frame, &run2.dither, target, ml2);
                t += fine.len as u64;
                w_end = advance(est2.w, est2.v, fine.len as u64);
                self.validate(w_end, est2.v, target, &mut t, &mut noise, &mut w_end)?
            }
        };
        Ok(Attempt {
            w_end,
            v_hat: est.v,
            accepted,
            len: t - t0,
            optimistic,
            fine_max_measure,
        })
    }

    /// Probes the `delta`-interval centred on `w` (co-moving with `v`) for
    /// the validation rounds; advances the clock and the estimate.
    fn validate(
        &self,
        w: CirclePoint,
        v: CirclePoint,
        target: &Target,
        t: &mut u64,
        noise: &mut StreamRng,
        w_end: &mut CirclePoint,
    ) -> Result<bool> {
        let half = self.params.delta / 2.0;
        let window = ArcSet::from_arcs([(w.value() - half, w.value() + half)]);
        let verdict = yi_validate(&window, v, target, *t, self.rounds, &self.params.model, self.eta, noise)?;
        *t += self.rounds as u64;
        *w_end = advance(w, v, self.rounds as u64);
        Ok(verdict.accepted)
    }

    /// Runs one non-adaptive block starting after time `t0` and returns the
    /// distances of the observations to every candidate.
    #[allow(clippy::too_many_arguments)]
    fn block(
        &self,
        plan: &StagePlan,
        frame: Frame,
        target: &Target,
        t0: u64,
        master: u64,
        key: &[u64],
        noise: &mut StreamRng,
    ) -> Result<BlockRun> {
        let cb = Codebook::draw(plan.m, plan.len, plan.q, seed::derive(master, "codebook", key))?;
        let mut dither = Dither::draw(&mut seed::stream(master, "dither", key));
        let known = self.params.velocity == VelocityMode::Known;
        match frame {
            // Known velocity: the sets co-move with the target, so the row of
            // its initial offset is read at every step.
            Frame::Circle if known => dither.b = target.v,
            Frame::Circle => {}
            Frame::Zoom { .. } => dither.b = CirclePoint::new(0.0),
        }
        let model = &self.params.model;
        let weights = cb.column_weights();
        let mut y = Vec::with_capacity(plan.len);
        let mut optimistic = 0;
        let mut max_measure: f64 = 0.0;
        for n in 1..=plan.len {
            let probe = probe(&cb, weights[n - 1], &dither, frame, target, t0, n);
            max_measure = max_measure.max(probe.measure);
            let p = model.eval(probe.measure);
            let mut bit = sample_bsc(p, probe.x, noise);
            if probe.rel_measure > plan.measure_limit + 1e-12 {
                optimistic += 1;
            } else if self.params.artificial_noise && probe.rel_measure < plan.measure_limit {
                let extra = (plan.p_assumed - p) / (1.0 - 2.0 * p);
                if extra > 0.0 && noise.random::<f64>() < extra {
                    bit = !bit;
                }
            }
            y.push(bit);
        }
        let distances = match (&self.table, frame) {
            (Some(table), Frame::Circle) => table_distances(table, &cb, &y)?,
            _ => row_distances(&cb, &y),
        };
        Ok(BlockRun {
            distances,
            dither,
            optimistic,
            max_measure,
        })
    }

    /// Maps the decoded candidate back to a position at the block start and
    /// a velocity.
    fn estimate(&self, plan: &StagePlan, frame: Frame, dither: &Dither, target: &Target, d: Decision) -> Estimate {
        let a = dither.a.value();
        match (frame, &self.table) {
            (Frame::Circle, Some(table)) => {
                let (w, v) = table.representative(d.index);
                Estimate {
                    w: CirclePoint::new(a + w.value()),
                    v: CirclePoint::new(dither.b.value() + v.value()),
                }
            }
            (Frame::Circle, None) => Estimate {
                w: CirclePoint::new(a + (d.index as f64 + 0.5) / plan.m as f64),
                v: target.v,
            },
            (Frame::Zoom { start, width }, _) => {
                let u = CirclePoint::new(a + (d.index as f64 + 0.5) / plan.m as f64).value();
                Estimate {
                    w: CirclePoint::new(start + width * u),
                    v: target.v,
                }
            }
        }
    }
}
