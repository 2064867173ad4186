use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpdError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("pair list is stale and must be rebuilt before use")]
    StalePairList,

    #[error("invalid pair ({0}, {0}): a particle cannot pair with itself")]
    InvalidPair(usize),

    #[error("trajectory diverged at step {step}: {reason}")]
    Divergence { step: u64, reason: String },

    #[error("estimate undefined: {0}")]
    UndefinedEstimate(String),

    #[error("critical stepsize not determined: {0}")]
    NotDetermined(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for DpdError {
    fn from(e: std::io::Error) -> Self {
        DpdError::Io(e.to_string())
    }
}

impl From<csv::Error> for DpdError {
    fn from(e: csv::Error) -> Self {
        DpdError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, DpdError>;
