use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation failed ({invariant}): {detail}")]
    Validation { invariant: String, detail: String },

    #[error("blow-up on path {path} at step {step}")]
    BlowUp { path: usize, step: usize },

    #[error("regression failed at step {step}: {detail}")]
    Regression { step: usize, detail: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(invariant: &str, detail: impl Into<String>) -> Self {
        Error::Validation {
            invariant: invariant.to_string(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
