use thiserror::Error;

/// Errors raised by the numeric kernels, projections, models and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bisection bracket has no sign change: f(lo)={f_lo}, f(hi)={f_hi}")]
    NoSignChange { f_lo: f64, f_hi: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid constraint set: {0}")]
    InvalidConstraint(String),

    #[error("constraint set is empty at coordinate {0}")]
    EmptySet(usize),

    #[error("label {label} out of range for {classes} classes")]
    InvalidLabel { label: usize, classes: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;
