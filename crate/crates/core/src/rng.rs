//! Seeded random streams.
//!
//! Every stochastic routine in this crate takes its generator explicitly. Runs
//! derive independent streams from one 64-bit seed so that, for example,
//! re-solving a saved log never perturbs the environment's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate. ChaCha output is specified bit-for-bit,
/// so seeded runs reproduce across platforms.
pub type StreamRng = ChaCha8Rng;

/// Well-known stream ids.
pub mod streams {
    /// Context draws and duel outcomes.
    pub const NATURE: u64 = 0;
    /// Exploration pair choices and exploitation sampling.
    pub const LEARNER: u64 = 1;
    /// Solver perturbations.
    pub const SOLVER: u64 = 2;
    /// Hypothetical duel tables materialized in analysis mode.
    pub const ANALYSIS: u64 = 3;
    /// Environment generators.
    pub const GENERATOR: u64 = 4;
}

/// Returns stream `stream` of the generator keyed by `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
