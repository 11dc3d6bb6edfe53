use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("severity below threshold: {value} < {threshold}")]
    SeverityBelowThreshold { value: f64, threshold: f64 },

    #[error("truncation region has (numerically) zero posterior mass: {0}")]
    ZeroMass(String),

    #[error("optimizer failed to converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("hessian is not negative definite at the located mode")]
    NotNegativeDefinite,

    #[error("requested sample of {requested} losses exceeds the in-memory cap of {cap}")]
    SampleTooLarge { requested: usize, cap: usize },

    #[error("inconsistent reports: {0}")]
    InconsistentReports(String),

    #[error("{path}:{line}: {message}")]
    Row {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse failure classes; the CLI maps these onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Computation,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter(_)
            | Error::InsufficientData(_)
            | Error::SeverityBelowThreshold { .. }
            | Error::InconsistentReports(_)
            | Error::Row { .. }
            | Error::Validation(_)
            | Error::Csv(_)
            | Error::Json(_) => ErrorClass::Validation,
            Error::ZeroMass(_)
            | Error::NoConvergence { .. }
            | Error::NotNegativeDefinite
            | Error::SampleTooLarge { .. } => ErrorClass::Computation,
            Error::Io { .. } => ErrorClass::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
