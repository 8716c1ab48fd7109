use std::io;
use std::path::PathBuf;

use mon_core::{DecodeError, EvalError, NormalityError, SynthError, ThresholdError};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: file not found", .0.display())]
    NotFound(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Decode { path: PathBuf, source: DecodeError },
    #[error("{}:{line}: {kind}", path.display())]
    Manifest {
        path: PathBuf,
        line: u64,
        kind: ManifestError,
    },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("artifact {}: {message}", dir.display())]
    Artifact { dir: PathBuf, message: String },
    #[error("config {}:{line}: {message}", path.display())]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid value {value:?} for {key}: {message}")]
    BadValue {
        key: String,
        value: String,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Normality {
        path: PathBuf,
        source: NormalityError,
    },
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManifestError {
    #[error("expected header {expected:?}, found {found:?}")]
    BadHeader { expected: String, found: String },
    #[error("expected {expected} fields, found {found}")]
    FieldCount { expected: usize, found: usize },
    #[error("unknown label {0:?}, expected normal or anomalous")]
    UnknownLabel(String),
    #[error("unknown role {0:?}, expected mon-build, evaluate or calibrate")]
    UnknownRole(String),
    #[error("{role} row {path:?} must be labeled normal")]
    AnomalousInPool { path: String, role: &'static str },
    #[error("empty path")]
    EmptyPath,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        let path = path.into();
        if source.kind() == io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn artifact(dir: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Artifact {
            dir: dir.into(),
            message: message.into(),
        }
    }
}
