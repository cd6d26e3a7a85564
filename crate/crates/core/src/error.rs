use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("length mismatch in {what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schedule/frame mismatch: {0}")]
    Schedule(String),

    #[error("frame too short: need {needed} samples, have {available}")]
    FrameTooShort { needed: usize, available: usize },

    #[error("duplicate slow-time grid index {0}")]
    DuplicateIndex(usize),

    #[error("{count} range-Doppler cells have an ill-conditioned pattern matrix")]
    Unresolvable { count: usize },

    #[error("pattern calibration failed spot validation: relative error {0:.3e}")]
    CalibrationMismatch(f64),

    #[error("malformed artifact: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
