use thiserror::Error;

/// Errors produced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A matrix or vector entry is NaN or infinite.
    #[error("non-finite value in {what} at (row {row}, col {col})")]
    NonFinite {
        what: &'static str,
        row: usize,
        col: usize,
    },

    /// Two inputs that must agree in shape do not.
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// A design column has zero variance and cannot be standardized.
    #[error("column {col} has zero variance; cannot standardize")]
    ZeroVarianceColumn { col: usize },

    /// CSV ingestion failed.
    #[error("csv: {0}")]
    Csv(String),

    /// An internal invariant was violated (e.g. a Cholesky factorization
    /// of a matrix that is positive definite by construction failed).
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
