//! Shared fixtures for the benchmarks.

use dwrecon_core::{AcquisitionConfig, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Standard normal single-precision tensor, fixed by `seed`.
pub fn normal_f32(dims: &[usize], seed: u64) -> Tensor<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(dims, |_| rng.sample::<f32, _>(StandardNormal)).expect("valid dims")
}

/// Desk acquisition cut to a shallow 64 × 32 grid so one iteration stays short.
pub fn shallow_config() -> AcquisitionConfig {
    let mut config = AcquisitionConfig::desk();
    config.grid.depth_end = 0.025;
    config.grid.depth_samples = 64;
    config.grid.lines = 32;
    config
}
