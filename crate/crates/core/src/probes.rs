//! Seeded random test signals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::signals::{Signal, TimeGrid};

pub const DEFAULT_SEED: u64 = 20_240_601;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries drawn uniformly from `[-amplitude, amplitude]`.
pub fn random_signal(rng: &mut impl Rng, grid: TimeGrid, dim: usize, amplitude: f64) -> Result<Signal> {
    let values = (0..grid.len() * dim).map(|_| rng.gen_range(-1.0..=1.0) * amplitude).collect();
    Signal::new(grid, dim, values)
}

/// Random signal with a random overall scale in `(0, amplitude]`, so probes cover
/// both small and large magnitudes.
pub fn random_scaled_signal(rng: &mut impl Rng, grid: TimeGrid, dim: usize, amplitude: f64) -> Result<Signal> {
    let scale = amplitude * rng.gen_range(0.0f64..1.0).max(1e-3);
    random_signal(rng, grid, dim, scale)
}

pub fn random_pairs(seed: u64, count: usize, grid: TimeGrid, dim: usize, amplitude: f64) -> Result<Vec<(Signal, Signal)>> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| Ok((random_scaled_signal(&mut r, grid, dim, amplitude)?, random_scaled_signal(&mut r, grid, dim, amplitude)?)))
        .collect()
}

pub fn random_signals(seed: u64, count: usize, grid: TimeGrid, dim: usize, amplitude: f64) -> Result<Vec<Signal>> {
    let mut r = rng(seed);
    (0..count).map(|_| random_scaled_signal(&mut r, grid, dim, amplitude)).collect()
}
