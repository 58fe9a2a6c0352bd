use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] turnover_core::Error),

    #[error("{0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    /// Process exit status: 3 for numerical failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    /// Prefixes the error with the stage that raised it.
    pub fn at_stage(self, stage: &'static str) -> Self {
        match self {
            Self::Core(e) => Self::Core(e.at_stage(stage)),
            other => other,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
