use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("too many tagged variables: {requested} requested, capacity is {capacity}")]
    Capacity { requested: usize, capacity: usize },

    #[error("tag sets differ: {left:?} vs {right:?}")]
    TagMismatch { left: Vec<u32>, right: Vec<u32> },

    #[error("division by a dual number with zero value")]
    Singularity,

    #[error("{function} is undefined at {value}")]
    Domain { function: &'static str, value: f64 },

    #[error("x{variable} = {value} lies outside its domain {bound}")]
    OutOfDomain {
        variable: usize,
        value: f64,
        bound: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("activation error: {0}")]
    Activation(String),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Training { epoch: usize, loss: f64 },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("AUC is undefined: {0}")]
    UndefinedAuc(String),

    #[error("index {index} out of range for {len} items")]
    Index { index: usize, len: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// True for failures of the filesystem rather than of the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
