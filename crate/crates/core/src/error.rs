use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("angle undefined: {0}")]
    UndefinedAngle(&'static str),

    #[error("cannot normalize a zero vector")]
    Normalization,

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("inconsistent network spec at layer {layer}: {reason}")]
    Spec { layer: String, reason: String },

    #[error("unexpected network structure: {0}")]
    Structure(String),

    #[error("index {index} out of range (valid: {valid})")]
    Range { index: usize, valid: String },

    #[error("mode error: {0}")]
    Mode(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("bad format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("truncated file {path}: expected {expected} bytes, found {found}")]
    Length {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dims(what: impl Into<String>) -> Self {
        Error::Dimension(what.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
