use std::path::{Path, PathBuf};

use engage_core::calllog::CallLogError;
use engage_core::predictors::PredictError;
use engage_core::rmab::RmabError;
use engage_core::sim::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in {field}: {message}")]
    Config { field: String, message: String },
    #[error("{0}")]
    Data(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        CliError::Config { field: field.to_string(), message: message.into() }
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| CliError::Io { path: path.to_path_buf(), source }
    }

    /// 2 for configuration errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Data(_) | CliError::Io { .. } => 1,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidSpec { field, message } => CliError::Config { field, message },
            SimError::BudgetTooLarge { .. } => CliError::config("k", e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<PredictError> for CliError {
    fn from(e: PredictError) -> Self {
        match e {
            PredictError::InvalidConfig(message) => CliError::Config { field: "train".into(), message },
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<CallLogError> for CliError {
    fn from(e: CallLogError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<RmabError> for CliError {
    fn from(e: RmabError) -> Self {
        match e {
            RmabError::InvalidDiscount(_) => CliError::config("plan.cluster.discount", e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
