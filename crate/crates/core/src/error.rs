use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by samplers, optimizers, models and oracles.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// The floored simplex `{p : sum p = 1, p_j >= min_prob}` is empty.
    #[error("infeasible probability floor: {n} * {min_prob} > 1")]
    InfeasibleFloor { n: usize, min_prob: f64 },

    #[error("example index {index} out of range for {n} examples")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite gradient for example {example}")]
    NonFiniteGradient { example: usize },

    #[error("non-finite gradient estimate")]
    NonFiniteEstimate,

    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("stored sampling probability is zero for example {example}")]
    ZeroProbability { example: usize },

    #[error("all gradient norms are zero")]
    AllZeroNorms,

    #[error("enumeration budget exceeded: {states} ordered batches > {budget}")]
    BudgetExceeded { states: u128, budget: u128 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
