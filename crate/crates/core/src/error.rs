use thiserror::Error;

/// Errors raised anywhere in the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file.
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        /// 1-based row in the source file (header is row 1).
        row: usize,
        /// 1-based column.
        column: usize,
        /// What went wrong.
        message: String,
    },

    /// Input violates a documented precondition or invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Model JSON violates the schema; `pointer` is the JSON pointer of the offending node.
    #[error("schema error at {pointer}: {message}")]
    Schema {
        /// JSON pointer, e.g. `/phi/1/0`.
        pointer: String,
        /// What went wrong.
        message: String,
    },

    /// A numerical routine failed (non-convergence, singular system).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An error raised inside a named pipeline stage.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Self::Numerical(msg.into())
    }

    pub(crate) fn schema(pointer: impl Into<String>, msg: impl Into<String>) -> Self {
        Self::Schema {
            pointer: pointer.into(),
            message: msg.into(),
        }
    }

    /// True for failures of numerical routines, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Self::Numerical(_) => true,
            Self::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    /// Tags the error with the pipeline stage that raised it.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Self::Stage { stage, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
