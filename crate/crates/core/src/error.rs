use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (even after jitter)")]
    NotPositiveDefinite,
    #[error("Jacobi iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("regularised Gram matrix is singular")]
    SingularSystem,
    #[error("dyadic sampling needs an even tau >= 2, got {0}")]
    InvalidTau(usize),
    #[error("ensemble spec violates its family constraints: {0}")]
    InvalidSpec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}
