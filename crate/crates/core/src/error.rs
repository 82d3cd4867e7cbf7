use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = HoiError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HoiError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Schema-level problem; serde_json reports the line and column.
    #[error("malformed {what} in {path}: {source}")]
    Parse {
        what: &'static str,
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid box [{x1}, {y1}, {x2}, {y2}]: zero or negative area")]
    DegenerateBox { x1: f64, y1: f64, x2: f64, y2: f64 },

    #[error("unknown oracle `{0}`")]
    UnknownOracle(String),

    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),

    #[error("{0}")]
    Undefined(String),

    #[error("{stage}: {message}")]
    Computation {
        stage: &'static str,
        message: String,
    },
}

impl HoiError {
    pub fn validation(msg: impl Into<String>) -> Self {
        HoiError::Validation(msg.into())
    }

    /// Process exit code for the CLI: 2 for bad inputs, 3 for computation failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            HoiError::Io { .. }
            | HoiError::Parse { .. }
            | HoiError::Validation(_)
            | HoiError::DegenerateBox { .. }
            | HoiError::UnknownOracle(_)
            | HoiError::InfeasibleScenario(_) => 2,
            HoiError::Undefined(_) | HoiError::Computation { .. } => 3,
        }
    }
}
