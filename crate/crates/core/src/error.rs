use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite {what} (component {index})")]
    Domain { what: &'static str, index: usize },

    #[error("integration produced a non-finite value at node {node} (t = {t})")]
    Integration { node: usize, t: f64 },

    #[error("optimizer iteration {iteration}: {source}")]
    Optimizer {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trajectories are not on a common mesh")]
    MeshMismatch,

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("config line {line}: `{key}`: {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    #[error("invalid setting: {0}")]
    Invalid(String),

    #[error("scenario set has no uncontrolled baseline")]
    MissingBaseline,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
