//! Acquiring a target that moves at constant velocity on the unit circle when
//! every probe returns a noisy membership bit whose crossover probability grows
//! with the measure of the probed set.
//!
//! The crate is split the same way the problem is:
//!
//! * [`noise`]: the measurement-dependent noise function and BSC sampling.
//! * [`infotheory`]: entropies, capacities, Gallager's `E0`, maximal targeting
//!   rates and the reliability curves.
//! * [`geometry`]: circle arithmetic, bin partitions and trajectory tables.
//! * [`coding`]: random codebooks, dither, arc sets and trajectory codewords.
//! * [`engine`]: decoders, search strategies and the Monte Carlo harness.

pub mod coding;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod infotheory;
pub mod noise;
pub mod optimize;
pub mod seed;

pub use coding::{ArcSet, Codebook, Dither};
pub use engine::{
    monte_carlo, SearchParams, Searcher, Strategy, SweepStats, TrialOutcome, VelocityMode,
};
pub use error::{Error, Result};
pub use geometry::{CirclePoint, Trajectory, TrajectoryTable};
pub use infotheory::{CurveId, ExponentCurve, Kappa, RatePoint};
pub use noise::NoiseModel;
