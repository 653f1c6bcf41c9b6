//! Library side of the `fpcr` binary, exposed so integration tests can
//! reach the CSV and config helpers directly.

pub mod commands;
pub mod config;
pub mod data;
pub mod output;

use fpcr_core::error::FpcrError;

/// Error carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad config, flags or input file (exit 2).
    Input(String),
    /// Data the procedure cannot handle, or too many failed replicates (exit 3).
    Degenerate(String),
    /// One or more validation checks failed (exit 4).
    Validation(String),
    /// Anything else (exit 1).
    Other(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::Validation(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Degenerate(m) => write!(f, "degenerate data: {m}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<FpcrError> for CliError {
    fn from(e: FpcrError) -> Self {
        match e {
            FpcrError::DegenerateData(_)
            | FpcrError::SingularDesign { .. }
            | FpcrError::SingularOperator { .. }
            | FpcrError::ExperimentAborted { .. } => CliError::Degenerate(e.to_string()),
            FpcrError::InvalidGrid { .. }
            | FpcrError::InsufficientData { .. }
            | FpcrError::NonFinite { .. }
            | FpcrError::Domain(_) => CliError::Input(e.to_string()),
            other => CliError::Other(other.into()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
