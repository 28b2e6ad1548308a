//! Benchmark fixtures.

use rand::Rng;
use vnw_core::batch::{estimator_blocks, explore_uniform};
use vnw_core::env::make_environment;
use vnw_core::rng::{stream, streams};
use vnw_core::{BlockGame, ContextualEnvironment, EnvKind};

pub fn environment(kind: EnvKind) -> ContextualEnvironment {
    make_environment(&kind, 0).expect("valid generator")
}

/// The estimator game of an `m`-round uniform exploration log.
pub fn game(env: &ContextualEnvironment, m: usize) -> BlockGame {
    estimator_blocks(&explore_uniform(env, m, 1).expect("m > 0"))
}

pub fn random_cost(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, streams::ANALYSIS);
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}
