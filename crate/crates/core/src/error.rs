use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {field}: {message}")]
    Format { field: String, message: String },

    #[error("line {line}: {message}")]
    Row { line: usize, message: String },

    #[error("join error: embedding ids missing from pairs: {}", missing.join(", "))]
    Join { missing: Vec<String> },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("solver failed after {iterations} iterations: {message}")]
    Solver { iterations: usize, message: String },

    #[error("stage error: {left} and {right} disagree: {message}")]
    Stage {
        left: PathBuf,
        right: PathBuf,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 1 validation, 2 solver failure, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::Solver { .. } => 2,
            _ => 1,
        }
    }
}
