use std::io;
use std::path::PathBuf;

use eldercare_core::allocation::AllocationError;
use eldercare_core::detection::DetectionError;
use eldercare_core::dynamics::DynamicsError;
use eldercare_core::economics::EconomicsError;
use eldercare_core::imputation::ImputationError;
use eldercare_core::scenario::{ScenarioError, ValidationReport};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{context}: invalid input\n{report}")]
    Invalid { context: String, report: ValidationReport },
    #[error("{context}: {message}")]
    Validation { context: String, message: String },
    #[error("{context}: numerical failure: {message}")]
    Numerical { context: String, message: String },
}

impl CliError {
    /// Stable process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Parse { .. } => 1,
            CliError::Invalid { .. } | CliError::Validation { .. } => 2,
            CliError::Numerical { .. } => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn scenario(context: &str, e: ScenarioError) -> Self {
        match e {
            ScenarioError::Invalid(report) => CliError::Invalid {
                context: context.to_string(),
                report,
            },
            ScenarioError::UnknownPreset(_) => CliError::Usage(e.to_string()),
            other => CliError::parse(context, other),
        }
    }

    pub fn dynamics(context: &str, e: DynamicsError) -> Self {
        let message = e.to_string();
        let context = context.to_string();
        match e {
            DynamicsError::NonFinite(_) => CliError::Numerical { context, message },
            _ => CliError::Validation { context, message },
        }
    }

    pub fn economics(context: &str, e: EconomicsError) -> Self {
        let message = e.to_string();
        let context = context.to_string();
        match e {
            EconomicsError::UndefinedCbr(_) => CliError::Numerical { context, message },
            _ => CliError::Validation { context, message },
        }
    }

    pub fn imputation(context: &str, e: ImputationError) -> Self {
        let message = e.to_string();
        let context = context.to_string();
        match e {
            ImputationError::Factorization { .. } => CliError::Numerical { context, message },
            _ => CliError::Validation { context, message },
        }
    }

    pub fn allocation(context: &str, e: AllocationError) -> Self {
        CliError::Validation {
            context: context.to_string(),
            message: e.to_string(),
        }
    }

    pub fn detection(context: &str, e: DetectionError) -> Self {
        CliError::Validation {
            context: context.to_string(),
            message: e.to_string(),
        }
    }
}
