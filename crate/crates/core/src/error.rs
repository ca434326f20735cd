use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum DscofsError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value {value} at row {row}, column {col}")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical failure at iteration {iter}: {reason} (trace: {trace:?})")]
    Numerical {
        iter: usize,
        reason: String,
        trace: Vec<f64>,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl DscofsError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        DscofsError::Shape(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        DscofsError::InvalidInput(msg.into())
    }

    /// Whether this error came from the numerics rather than from the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, DscofsError::Numerical { .. })
    }
}

pub type Result<T> = std::result::Result<T, DscofsError>;
