use thiserror::Error;

/// Errors produced by the simulation and signal-processing routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument was outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter set failed validation. `field` names the offending parameter.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    /// Inputs that must share a time base did not.
    #[error("mismatched bin widths: {0} s vs {1} s")]
    BinWidthMismatch(f64, f64),

    /// The response carries no energy.
    #[error("no received signal")]
    NoSignal,

    /// The frame cannot hold the requested pulse.
    #[error("frame too short: need {needed} s, have {available} s")]
    FrameTooShort { needed: f64, available: f64 },

    /// The trace is shorter than the processing window or template.
    #[error("trace too short: {len} chips, need at least {needed}")]
    TraceTooShort { len: usize, needed: usize },

    /// An aggregate was requested over an empty set.
    #[error("empty input: {0}")]
    Empty(String),
}

impl Error {
    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_owned(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
