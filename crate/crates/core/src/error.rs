use thiserror::Error;

/// Errors raised by the design library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A matrix that must be positive definite failed factorization.
    #[error("matrix is numerically singular (pivot {pivot:e} at index {index}, threshold {threshold:e})")]
    Singular {
        index: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("eigendecomposition did not converge")]
    Convergence,

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("enumeration too large: {count} candidates exceeds the limit of {limit}")]
    TooLarge { count: u128, limit: u128 },

    #[error("conic solver failure: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
