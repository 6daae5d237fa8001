use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("cannot write to {}: {source}", path.display())]
    Unwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot read {}: {source}", path.display())]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] fairweight::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn config_error(path: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Machine-readable form printed on failure.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl From<&CliError> for ErrorReport {
    fn from(e: &CliError) -> Self {
        let (kind, field) = match e {
            CliError::Config { path, .. } => ("invalid_config", Some(path.clone())),
            CliError::Unwritable { .. } => ("unwritable_path", None),
            CliError::Unreadable { .. } => ("unreadable_path", None),
            CliError::Core(_) => ("computation", None),
            CliError::Json(_) => ("json", None),
            CliError::Csv(_) => ("csv", None),
            CliError::Io(_) => ("io", None),
        };
        Self {
            error: kind,
            message: e.to_string(),
            field,
        }
    }
}
