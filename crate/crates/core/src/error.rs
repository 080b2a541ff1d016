//! Error type shared by every subsystem.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        context: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("empty region has no mass center")]
    EmptyRegion,

    #[error("event statistics are empty; cannot recommend a sequence length")]
    EmptyStats,

    #[error("annotation row {row} out of range: frame {frame}, ({r}, {c}) not inside {dims:?}")]
    AnnotationOutOfRange {
        row: usize,
        frame: usize,
        r: usize,
        c: usize,
        dims: Vec<usize>,
    },

    #[error("scene overcrowded at frame {frame}: no room to place a cell")]
    Overcrowded { frame: usize },

    #[error("{path}: {message}")]
    FileFormat { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing artifact for stage `{stage}`: expected {path}")]
    MissingArtifact { stage: String, path: PathBuf },
}

impl CoreError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn file_format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CoreError::FileFormat {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn shape(context: impl Into<String>, expected: &[usize], actual: &[usize]) -> Self {
        CoreError::ShapeMismatch {
            context: context.into(),
            expected: expected.to_vec(),
            actual: actual.to_vec(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
