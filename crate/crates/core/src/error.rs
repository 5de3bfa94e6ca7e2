use thiserror::Error;

use crate::graph::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

/// Engine-wide error type. Every variant maps onto one [`ErrorCode`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("not found: {0}")]
    NotFound(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("already exists: {0}")]
    AlreadyExists(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("graph failed validation with {} finding(s)", .0.findings.len())]
    InvalidGraph(ValidationReport),

    #[error("{file}{}: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    Dataset {
        file: String,
        line: Option<u64>,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),

    #[error("internal error: {0}")]
    Internal(String),
}

/// Coarse classification shared with the HTTP layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    NotFound,
    InvalidArgument,
    Conflict,
    Internal,
}

impl Error {
    pub fn code(&self) -> ErrorCode {
        match self {
            Error::NotFound(_) => ErrorCode::NotFound,
            Error::InvalidArgument(_)
            | Error::Schema { .. }
            | Error::InvalidGraph(_)
            | Error::Dataset { .. } => ErrorCode::InvalidArgument,
            Error::AlreadyExists(_) | Error::Conflict(_) => ErrorCode::Conflict,
            Error::Io(_) | Error::Internal(_) => ErrorCode::Internal,
        }
    }

    /// Path of the offending element, when the error carries one.
    pub fn detail_path(&self) -> Option<String> {
        match self {
            Error::Schema { path, .. } => Some(path.clone()),
            Error::Dataset { file, line, .. } => Some(match line {
                Some(l) => format!("{file}:{l}"),
                None => file.clone(),
            }),
            Error::InvalidGraph(report) => report.findings.first().map(|f| f.element.clone()),
            _ => None,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn not_found(msg: impl Into<String>) -> Self {
        Error::NotFound(msg.into())
    }

    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
