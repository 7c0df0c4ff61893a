use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("empty selection: {0}")]
    EmptySelection(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("projection error: {0}")]
    Projection(String),

    #[error("backend `{backend}` lacks capability: {message}")]
    Capability { backend: String, message: String },

    #[error("backend error: {message}")]
    Backend { message: String, diagnostics: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// I/O failure at `path`.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    /// Stable process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Param(_) | Error::Domain(_) | Error::Projection(_) => 2,
            Error::Format { .. } | Error::Json(_) | Error::Csv(_) | Error::Io { .. } => 3,
            Error::Capability { .. } | Error::Backend { .. } => 4,
            Error::EmptySelection(_) => 5,
        }
    }
}
