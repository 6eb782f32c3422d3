use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("length mismatch: {what} (expected {expected}, found {found})")]
    LengthMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid amplitude grid: {0}")]
    InvalidGrid(String),

    #[error("invalid generator state: {0}")]
    InvalidGeneratorState(String),

    #[error("invalid median window {window} for series of length {len}: {reason}")]
    InvalidWindow {
        window: usize,
        len: usize,
        reason: &'static str,
    },

    #[error("empty series: {0}")]
    EmptySeries(String),

    #[error("series too short: {what} needs more than {needed} samples, only {available} available")]
    SeriesTooShort {
        what: String,
        needed: usize,
        available: usize,
    },

    #[error(
        "regressor is rank deficient (numerical rank {rank} of {columns} columns, condition {condition:.3e}); dependent columns: {}",
        offending.join(", ")
    )]
    RankDeficient {
        rank: usize,
        columns: usize,
        condition: f64,
        offending: Vec<String>,
    },

    #[error("appended columns lie in the span of the existing regressor: {0}")]
    SingularAugmentation(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot separate parameters for {channel}: {reason}")]
    Separation { channel: String, reason: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with a pipeline stage label.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: impl Into<String>) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: impl Into<String>) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
