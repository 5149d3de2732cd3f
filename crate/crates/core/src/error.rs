use thiserror::Error;

/// Errors raised by the planning library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("query {point:?} lies outside the model domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("covariance matrix could not be factorized")]
    Factorization,

    #[error("no feasible trajectory found: {0}")]
    NoSolution(String),
}

pub type Result<T> = std::result::Result<T, Error>;
