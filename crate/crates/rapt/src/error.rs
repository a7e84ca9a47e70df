use std::path::PathBuf;

use thiserror::Error;

/// Errors from dataset IO, persistence, configuration, and the experiment
/// harness. Algorithmic errors from the core crate pass through unchanged.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] rapt_core::Error),
    #[error("io failure on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("unsupported case-base format version {found} (supported: {supported})")]
    FormatVersionMismatch { found: u16, supported: u16 },
    #[error("corrupt case-base payload: {0}")]
    CorruptPayload(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("strategy `{0}` requires a validation set")]
    MissingValidationSet(String),
    #[error("unknown strategy spec `{0}`")]
    UnknownStrategy(String),
    #[error("record `{0}` has no labels")]
    MissingLabels(String),
    #[error("no truth record for prediction id `{0}`")]
    MissingTruth(String),
    #[error("reports must contain at least one static and one retrieval-based strategy")]
    NoComparablePair,
}

impl Error {
    /// Stable machine-readable identifier, mirrored on stderr by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Core(e) => e.kind(),
            Error::Io { .. } => "IoFailure",
            Error::Parse { .. } => "ParseError",
            Error::FormatVersionMismatch { .. } => "FormatVersionMismatch",
            Error::CorruptPayload(_) => "CorruptPayload",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::MissingValidationSet(_) => "MissingValidationSet",
            Error::UnknownStrategy(_) => "UnknownStrategy",
            Error::MissingLabels(_) => "MissingLabels",
            Error::MissingTruth(_) => "MissingTruth",
            Error::NoComparablePair => "NoComparablePair",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}
