use thiserror::Error;

/// Errors surfaced by configuration and request validation.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("key {key} outside range [{low}, {high})")]
    KeyOutOfRange { key: u64, low: u64, high: u64 },
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("key range {0} too small: need at least 2 keys")]
    KeyRangeTooSmall(u64),
    #[error("transaction must contain at least one operation")]
    EmptyTransaction,
    #[error("invalid workload: {0}")]
    Workload(String),
    #[error("malformed history: {0}")]
    History(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
