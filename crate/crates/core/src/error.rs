use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A spec string could not be parsed.
    #[error("cannot parse {what} `{input}`: {reason}")]
    Parse {
        what: &'static str,
        input: String,
        reason: String,
    },

    /// A law parameter violates one of its constraints.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("moment undefined: {0}")]
    UndefinedMoment(String),

    /// Conditioning on an event that has zero probability.
    #[error("conditioning event has zero probability: {0}")]
    ZeroProbabilityCondition(String),

    #[error("count law has infinite support; the brute-force oracle needs a finite-support law")]
    InfiniteSupport,

    #[error("need at least 2 distinct buckets with >= {min_points} points, found {found}")]
    InsufficientBuckets { min_points: usize, found: usize },
}

impl Error {
    /// True for errors caused by malformed input rather than by the mathematics.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::InvalidParameter(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
