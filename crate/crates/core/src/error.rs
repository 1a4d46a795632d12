use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Array shapes disagree with each other or with the radar configuration.
    #[error("configuration mismatch: {0}")]
    Config(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("baseline failure: {0}")]
    BaselineFailure(String),

    #[error("no target present")]
    NoTarget,

    #[error("malformed file: {0}")]
    Format(String),

    #[error("recording id mismatch: events are from {events}, truth is from {truth}")]
    RecordingMismatch { events: String, truth: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
