use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numeric failure: {reason} (after {iterations} iterations)")]
    NumericFailure { reason: String, iterations: usize },

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("degenerate targets: training variance is zero")]
    DegenerateTarget,

    #[error("divergent mode: per-mode rate {rate} exceeds 2")]
    DivergentMode { rate: f64 },

    #[error("divergence: non-finite weights at step {step}")]
    Divergence { step: usize },

    #[error("insufficient data for {optimizer} at s={s}: {reason}")]
    InsufficientData {
        optimizer: String,
        s: f64,
        reason: String,
    },

    #[error("invalid loss: mean loss {value} at N={n} is not positive")]
    InvalidLoss { n: usize, value: f64 },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("schema mismatch in {path}: {reason}")]
    Schema { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
