use thiserror::Error;

/// Errors reported by the design, indicator, urn and queueing modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no design available: {0}")]
    NoDesignAvailable(String),

    /// The closed form does not apply to these parameters; measure empirically instead.
    #[error("unsupported parameters: {0}")]
    UnsupportedParameters(String),

    #[error("degenerate overlap distribution: E[X] = 0")]
    DegenerateOverlap,

    #[error("simulation underrun: collected {started} of {wanted} measured jobs before {reason}")]
    SimulationUnderrun {
        started: usize,
        wanted: usize,
        reason: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
