use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed WAV: {0}")]
    MalformedWav(String),

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("FFT size {0} is not a power of two")]
    FftSizeNotPowerOfTwo(usize),

    #[error("frame of {frame} samples does not fit FFT size {fft_size}")]
    FrameTooLong { frame: usize, fft_size: usize },

    #[error("invalid MFCC configuration: {0}")]
    InvalidConfig(String),

    #[error("channel mismatch: expected {expected}, found {found}")]
    ChannelMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("unknown architecture `{0}` (expected one of A, B, C, D)")]
    UnknownArchitecture(String),

    #[error("malformed architecture spec: {0}")]
    MalformedSpec(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("malformed file format: {0}")]
    Format(String),

    #[error("missing directory {0}")]
    MissingDirectory(PathBuf),

    #[error("no valid files found under {0}")]
    NoValidFiles(PathBuf),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("training diverged: non-finite loss in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("invalid metrics: {0}")]
    InvalidMetrics(String),

    #[error(
        "no feasible candidate after {evaluated} evaluations (best infeasible accuracy {best_accuracy:.4})"
    )]
    NoFeasibleCandidate {
        evaluated: usize,
        best_accuracy: f64,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
