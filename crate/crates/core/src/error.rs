use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error category, used by the command-line driver to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: empty file")]
    EmptyFile { path: PathBuf },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("timestamps not strictly increasing at row {row}")]
    NonMonotonic { row: usize },

    #[error("missing frame at {missing} (expected interval {interval}s)")]
    Gap { missing: String, interval: i64 },

    #[error("timestamp {got} is off the {interval}s grid starting at {start}")]
    OffGrid { got: i64, start: i64, interval: i64 },

    #[error("target interval {target}s is not a positive multiple of {interval}s")]
    IntervalMismatch { target: i64, interval: i64 },

    #[error("expected {expected} channels, got {got}")]
    ChannelMismatch { expected: usize, got: usize },

    #[error("sequence lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty sequence")]
    EmptySequence,

    #[error("split {requested} exceeds series length {available}")]
    SplitTooLong { requested: usize, available: usize },

    #[error("series too short: need {needed} frames, have {have}")]
    TooShort { needed: usize, have: usize },

    #[error("design matrix is rank deficient for channel {channel}")]
    RankDeficient { channel: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("out-of-order frame: timestamp {got} after {last}")]
    OutOfOrder { got: i64, last: i64 },

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("frame {t} is in warm-up: no forecast covers it")]
    WarmUp { t: usize },

    #[error("forecast weights sum to {z:e}, below floor")]
    DegenerateWeights { z: f64 },

    #[error("reference LTI has standard deviation {stdev:e}; cannot set the logistic rate")]
    DegenerateReference { stdev: f64 },

    #[error("AUC undefined: labels contain a single class")]
    SingleClass,

    #[error("score/label alignment: {0}")]
    Alignment(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::Config(_) | Error::IntervalMismatch { .. } | Error::SplitTooLong { .. } => {
                ErrorKind::Config
            }
            Error::Divergence { .. }
            | Error::DegenerateWeights { .. }
            | Error::DegenerateReference { .. }
            | Error::RankDeficient { .. }
            | Error::SingleClass => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}
