//! Shared fixtures for the criterion benchmarks.

use circsearch::NoiseModel;

/// Linear noise growing from `p[0] = 0.1` to `p[1/2] = 0.45`.
pub fn linear_model() -> NoiseModel {
    NoiseModel::linear(0.1, 0.45).expect("valid model")
}
