use std::path::PathBuf;

use crate::models::ModelInstance;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("power iteration for the Hessian norm at k = {k} did not converge within {iterations} iterations")]
    PowerIteration { k: i64, iterations: usize },

    /// The iterate at `iteration` produced a non-finite objective or gradient.
    /// `last_valid` is the most recent accepted iterate.
    #[error("non-finite objective or gradient at iteration {iteration}")]
    NonFinite {
        iteration: usize,
        last_valid: Box<ModelInstance>,
    },

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("value not representable as f64: {0}")]
    Overflow(String),

    #[error("cannot match {estimated} estimated positions against {truth} true positions")]
    CountMismatch { estimated: usize, truth: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
