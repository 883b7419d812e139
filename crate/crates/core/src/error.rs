use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected n = {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("adversary produced a non-monotone order at generation {generation}: {detail}")]
    HookViolation { generation: u64, detail: String },

    #[error("unknown adversary strategy `{0}`")]
    UnknownStrategy(String),

    #[error("malformed record: {0}")]
    MalformedRecord(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
