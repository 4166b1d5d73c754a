use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value: {0}")]
    InvalidValue(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{path}: sample rate {found} Hz, expected {expected} Hz (convert the file offline)")]
    RateMismatch {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("mel filter {index} covers no FFT bins; lower n_mels or raise fft_size")]
    DegenerateFilter { index: usize },

    #[error("annotation value {value} for song {song_id} lies outside [-1, 1]")]
    ScaleViolation { song_id: String, value: f64 },

    #[error("malformed data: {0}")]
    Format(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("forward cache does not belong to this network state")]
    StaleCache,

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for I/O and data problems, 2 for numeric failures, 3 for usage.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Csv(_)
            | Error::Wav(_)
            | Error::Format(_)
            | Error::RateMismatch { .. }
            | Error::UnsupportedEncoding(_)
            | Error::ScaleViolation { .. }
            | Error::Empty(_) => 1,
            Error::InvalidValue(_)
            | Error::Diverged { .. }
            | Error::StaleCache
            | Error::DegenerateFilter { .. } => 2,
            Error::InvalidArgument(_) | Error::ShapeMismatch(_) => 3,
        }
    }
}
