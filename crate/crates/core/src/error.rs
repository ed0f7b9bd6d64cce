use std::path::PathBuf;

use thiserror::Error;

use crate::model::ModelParams;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("modularity is undefined on a graph without edges")]
    UndefinedModularity,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("node id {id} out of range for a graph of {n} nodes")]
    NodeOutOfRange { id: usize, n: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite values in {0}")]
    NonFinite(&'static str),

    /// Training produced a non-finite loss or update. Carries the last
    /// parameters for which the objective was finite.
    #[error("training diverged at iteration {iter}: {reason}")]
    Divergence {
        iter: usize,
        reason: String,
        last_finite: Box<ModelParams>,
    },

    #[error("malformed JSON")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that stem from numerics rather than from input data.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::Divergence { .. })
    }
}
