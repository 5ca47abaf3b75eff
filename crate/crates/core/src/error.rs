use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} = {value} is outside the domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error(transparent)]
    Decode(#[from] DecodeError),

    #[error("output failed: {0}")]
    Output(String),
}

/// Failures of the two-stage decoder. These are measured events in the
/// harness, not crashes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("degenerate observation: the channel output has zero norm")]
    DegenerateObservation,

    #[error("cap underflow: {retained} codewords retained, {required} required")]
    CapUnderflow { retained: usize, required: usize },

    #[error(
        "exact enumeration refused: {subsets:.3e} subsets exceed the cap {cap}; use local search"
    )]
    EnumerationCapExceeded { subsets: f64, cap: u64 },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
