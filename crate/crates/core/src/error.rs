use thiserror::Error;

/// Errors raised by the estimation, inference and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FpcrError {
    #[error("invalid grid: size {m} is below the minimum of {min}")]
    InvalidGrid { m: usize, min: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("insufficient data: {n} observations, at least {min} required")]
    InsufficientData { n: usize, min: usize },

    #[error("singular operator: eigenvalue {index} is {value:e}, tolerance {tolerance:e}")]
    SingularOperator {
        index: usize,
        value: f64,
        tolerance: f64,
    },

    #[error("singular design at component {index}: {detail}")]
    SingularDesign { index: usize, detail: String },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("size limit exceeded: {n} > {max}")]
    SizeLimit { n: usize, max: usize },

    #[error("experiment aborted: {failed} of {reps} replicates failed (first error: {first})")]
    ExperimentAborted {
        failed: usize,
        reps: usize,
        first: String,
    },
}

pub type Result<T> = std::result::Result<T, FpcrError>;
