use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the domain of a special function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Process parameters violate an invariant.
    #[error("invalid process parameters: {0}")]
    InvalidParams(String),

    /// Diffusion time outside the admissible interval.
    #[error("time {t} outside [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A simulated state or score became NaN/inf.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Silent or degenerate signals where a ratio is undefined.
    #[error("degenerate signal: {0}")]
    Degenerate(String),

    /// WAV file outside the supported mono 16-bit PCM format.
    #[error("unsupported audio: {0}")]
    UnsupportedAudio(String),

    #[error("audio I/O: {0}")]
    Audio(#[from] hound::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
