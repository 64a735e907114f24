use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed or non-finite input data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value outside its admissible range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A segment on which no regression can be fitted.
    #[error("degenerate segment ({lo}, {hi}]: {reason}")]
    DegenerateSegment {
        lo: usize,
        hi: usize,
        reason: String,
    },

    #[error("state space of {size} states exceeds the enumeration guard of {limit}")]
    StateSpaceTooLarge { size: f64, limit: f64 },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
