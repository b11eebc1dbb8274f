use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    /// The noise covariance (or a spectral density) is not positive definite,
    /// or every eigenvalue handed to a waterfilling solver is zero.
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn is_degeneracy(&self) -> bool {
        matches!(self, Error::Degenerate(_))
    }
}
