use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid channel state: {0}")]
    InvalidChannel(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),
    #[error("instance exceeds exhaustive-search guard rails: {0}")]
    GuardRail(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
