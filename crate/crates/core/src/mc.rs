//! Seeded Monte Carlo harness.
//!
//! Samples are split into fixed-size blocks. Block `b` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream `b`, so every block sees the
//! same numbers no matter which thread runs it, and block results are
//! reduced in block order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Samples per block.
pub const BLOCK_SIZE: u64 = 4096;

/// The generator for block `block` of a run seeded with `seed`.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Runs `f(rng, count)` once per block and returns the results in block
/// order.
pub fn run_blocks<T, F>(samples: u64, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> T + Sync,
{
    let blocks = samples.div_ceil(BLOCK_SIZE);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let count = BLOCK_SIZE.min(samples - b * BLOCK_SIZE);
            f(&mut block_rng(seed, b), count)
        })
        .collect()
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Proportion `hits / samples` with the binomial standard error.
    pub fn proportion(hits: u64, samples: u64) -> Self {
        let n = samples as f64;
        let p = hits as f64 / n;
        Estimate { mean: p, stderr: (p * (1.0 - p) / n).sqrt() }
    }

    /// Sample mean and standard error from a running sum and sum of squares.
    pub fn from_moments(sum: f64, sum_sq: f64, samples: u64) -> Self {
        let n = samples as f64;
        let mean = sum / n;
        let var = if samples > 1 {
            ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate { mean, stderr: (var / n).sqrt() }
    }
}
