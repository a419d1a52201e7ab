use alloc::string::String;

/// Errors raised by the core crate.
///
/// Abstentions are not errors; measurement routines report them through
/// [`crate::guardrails::Outcome`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid recording: {0}")]
    Recording(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("window too short: {0}")]
    TooShort(String),
    #[error("measurement `{0}` has no provenance")]
    MissingProvenance(String),
    #[error("measurement `{0}` failed plausibility and must be re-measured or abstained")]
    Implausible(String),
    #[error("template error: {0}")]
    Template(String),
}

pub type Result<T> = core::result::Result<T, Error>;
