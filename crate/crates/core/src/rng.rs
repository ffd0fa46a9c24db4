//! Seeded random number generation.
//!
//! All randomness in the crate flows through [`SeededRng`], a ChaCha8 stream
//! keyed by a `u64` seed and a stream id, so that independent experiments
//! (different learning rates, different purposes) draw from disjoint streams
//! while remaining reproducible bit for bit.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// The generator used everywhere in the crate.
pub type SeededRng = ChaCha8Rng;

/// Stream ids reserved for particular purposes.
pub mod stream {
    /// Initial point of a trajectory.
    pub const INIT: u64 = 0;
    /// Random ensemble construction (hyperplane normals, Hessian factors).
    pub const ENSEMBLE: u64 = 1;
    /// Uniform-sphere baselines.
    pub const BASELINE: u64 = 2;
    /// First stream used for batch sampling; trajectory `i` uses `BATCH_BASE + i`.
    pub const BATCH_BASE: u64 = 16;
}

/// Generator for `(seed, stream)`.
pub fn seeded(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` independent standard normal draws.
pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}
