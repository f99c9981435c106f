use std::path::Path;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },

    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },

    #[error("{path} is invalid:\n  {}", failures.join("\n  "))]
    InvalidFile { path: String, failures: Vec<String> },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] noether_core::Error),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 1 when a computed quantity missed its tolerance, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if matches!(e.root(), noether_core::Error::ToleranceExceeded { .. }) => 1,
            _ => 2,
        }
    }
}
