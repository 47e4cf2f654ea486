use metacov::analysis::AnalysisError;
use metacov::guidance::GuidanceError;
use metacov::ingest::IngestError;
use metacov::toytarget::ToyError;
use metacov::{CoverageError, McError};
use thiserror::Error;

/// Failure classes, one per exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Contract(String),
    #[error("{0}")]
    Policy(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Contract(_) => 2,
            CliError::Policy(_) => 3,
        }
    }

    pub fn io(path: impl std::fmt::Display, e: std::io::Error) -> Self {
        CliError::Input(format!("{path}: {e}"))
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<CoverageError> for CliError {
    fn from(e: CoverageError) -> Self {
        match e {
            CoverageError::GranularityMismatch { .. } => CliError::Contract(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        if e.is_contract_violation() {
            CliError::Contract(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::WrongGranularity(_) => CliError::Contract(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<ToyError> for CliError {
    fn from(e: ToyError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<GuidanceError> for CliError {
    fn from(e: GuidanceError) -> Self {
        match e {
            GuidanceError::Mc(inner) => inner.into(),
            GuidanceError::GranularityMismatch { .. } | GuidanceError::TargetFailure { .. } => {
                CliError::Contract(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}
