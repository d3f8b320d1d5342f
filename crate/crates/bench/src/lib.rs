//! Shared fixtures for the kernel benchmarks.

use scalesep::{random, GridSpec, SpectralField};

/// Divergence-free random field on a `2π` box.
pub fn fixture(dim: usize, n: usize) -> (GridSpec, SpectralField) {
    let grid = GridSpec::periodic(dim, n, 0.05).expect("valid benchmark grid");
    let f = random::divergence_free(&grid, 1.0, n as f64 / 3.0, &mut random::rng(1)).expect("field");
    (grid, f)
}
