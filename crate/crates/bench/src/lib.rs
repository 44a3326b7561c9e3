//! Fixtures shared by the benchmarks.

use rcar_core::{ModelParams, NoiseSpec, Trajectory};

/// θ = 0.3, α = 0.5, Gaussian σ₂ = 1, τ₂ = 0.1.
pub fn reference_params() -> ModelParams {
    ModelParams::new(
        0.3,
        0.5,
        NoiseSpec::gaussian(1.0).expect("valid variance"),
        Some(NoiseSpec::gaussian(0.1).expect("valid variance")),
    )
    .expect("admissible parameters")
}

pub fn reference_path(n: usize) -> Trajectory {
    rcar_core::simulate::simulate(
        &reference_params(),
        n,
        1,
        rcar_core::simulate::DEFAULT_BURN_IN,
    )
    .expect("stationary parameters")
}
