use thiserror::Error;

/// Errors raised by the core algorithms and data types.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("entry ({0}, {1}) is outside [-1, 1]")]
    RangeViolation(usize, usize),
    #[error("entries ({0}, {1}) and ({1}, {0}) are not skew-symmetric")]
    SkewSymmetryViolation(usize, usize),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("mixture has no atom with positive weight")]
    EmptyMixture,
    #[error("mixture weight {0} is negative or not finite")]
    NegativeWeight(f64),
    #[error("action {action} is out of range for {actions} actions")]
    ActionOutOfRange { action: usize, actions: usize },
    #[error("context {context} is out of range for {contexts} contexts")]
    ContextOutOfRange { context: usize, contexts: usize },
    #[error("no convergence within {0} iterations")]
    NonConvergence(usize),
    #[error("policy class of size {size} exceeds the enumeration cap {cap}")]
    ClassTooLarge { size: String, cap: usize },
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("horizon of {0} rounds exceeded")]
    HorizonExceeded(usize),
    #[error("probability {p} of the chosen action is below p_min = {p_min}")]
    ProbabilityUnderflow { p: f64, p_min: f64 },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
