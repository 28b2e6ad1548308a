//! Contextual dueling bandits: von Neumann winners over preference matrices and
//! policy classes, with an online learner (two Exp4.P copies sparring) and a
//! batch one (uniform exploration, then the compact game over the policy hull
//! solved by perturbed-leader sparring or projected gradient ascent).

pub mod batch;
pub mod certify;
pub mod env;
pub mod error;
pub mod game;
pub mod io;
pub mod matrix;
pub mod mixture;
pub mod online;
pub mod policy;
pub mod rng;
pub mod simplex;
pub mod solvers;
pub mod winners;

pub use batch::{BlockGame, ClassificationOracle, DuelRecord, ExplorationLog};
pub use certify::Certificate;
pub use env::{ContextualEnvironment, EnvKind, MetaMatrix, PlayedRound};
pub use error::{Error, Result};
pub use matrix::PreferenceMatrix;
pub use mixture::{mixture_normalize, PolicyMixture, ProductMixture};
pub use online::{Exp4P, Experts, LearnedMixture};
pub use policy::{Policy, PolicyClass};
pub use simplex::SimplexDistribution;
pub use solvers::{HullPoint, SolverOutput, SolverReport};
pub use winners::{solve_von_neumann, GameSolution, WinnerReport};
