use thiserror::Error;

/// Errors produced by estimators, solvers and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Not enough observations for the requested operation.
    #[error("insufficient data: need at least {required} observations, got {actual}")]
    InsufficientData { required: usize, actual: usize },

    /// Matrix dimensions do not match.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Input contains a non-finite value.
    #[error("non-finite value at {context}")]
    NonFinite { context: String },

    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An iterative routine hit its iteration cap.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A tuning equation has no solution for the given data.
    #[error("tuning equation has no solution: {0}")]
    NoSolution(String),

    /// An estimator failed on a specific matrix entry.
    #[error("estimator failed at entry ({row}, {col}): {source}")]
    EntryFailure {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    /// A bandable block could not be estimated.
    #[error("bandable block starting at offset {start}: {source}")]
    BlockFailure {
        start: isize,
        #[source]
        source: Box<Error>,
    },

    /// A degenerate input made the requested quantity undefined.
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
