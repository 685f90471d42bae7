use std::path::PathBuf;

use thiserror::Error;

use crate::trainer::TrainReport;

pub type Result<T, E = DfcnError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DfcnError {
    #[error("shape mismatch in {op}: left is {left:?}, right is {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("function is not deterministic: two baseline evaluations gave {first} and {second}")]
    Determinism { first: f64, second: f64 },

    #[error("training diverged in {phase} at iteration {iteration}")]
    Divergence {
        phase: &'static str,
        iteration: usize,
        last_report: Option<Box<TrainReport>>,
    },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("integrity check failed for {file}: expected digest {expected}, found {found}")]
    Integrity {
        file: String,
        expected: String,
        found: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl DfcnError {
    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        DfcnError::Shape { op, left, right }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DfcnError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            DfcnError::Divergence { .. } => 2,
            DfcnError::Io { .. } => 3,
            _ => 1,
        }
    }
}
