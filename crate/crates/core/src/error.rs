use thiserror::Error;

/// Errors raised while building or transforming embedding problems.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid substrate: {0}")]
    Substrate(String),

    #[error("invalid template `{template}`: {issues}")]
    Template { template: String, issues: String },

    #[error("invalid service `{service}`: {reason}")]
    Service { service: String, reason: String },

    #[error("overlay of service `{0}` contains a cycle")]
    OverlayCycle(String),

    #[error("contract breach: {0}")]
    Contract(String),

    #[error("function at {locator} is not affine")]
    NonAffine { locator: String },

    #[error("unbounded resource function at {0}")]
    Unbounded(String),

    #[error("solution rejected: {0}")]
    Solution(String),

    #[error("instance exceeds oracle limits ({reason}); estimated search space {estimate:.3e}")]
    OracleLimits { reason: String, estimate: f64 },

    #[error("set cover instance too large: {0} subsets (max 20)")]
    SetCoverSize(usize),

    #[error("invalid event #{index}: {reason}")]
    Event { index: usize, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
