use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("frame count mismatch: {0}")]
    FrameCountMismatch(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid f0: {0}")]
    InvalidF0(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("parse error: {0}")]
    ParseError(String),

    #[error("language mismatch: {0}")]
    LanguageMismatch(String),

    #[error("duplicate language: {0}")]
    DuplicateLanguage(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("training diverged (NaN loss) at epoch {epoch}")]
    DivergenceDetected { epoch: usize, history: Vec<f64> },

    #[error("missing ppg: {0}")]
    MissingPpg(String),

    #[error("missing reference: {0}")]
    MissingReference(String),

    #[error("io error: {0}")]
    IoError(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::IoError(e.to_string())
    }
}
