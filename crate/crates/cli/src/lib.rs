//! File formats, configuration, metrics and subcommands around
//! [`measurefirst_core`].

pub mod commands;
pub mod config;
pub mod csvio;
pub mod edf;
pub mod eegr;
pub mod metrics;
pub mod weights;

use measurefirst_core::Error as CoreError;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_INVARIANT: u8 = 3;

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn input(error: anyhow::Error) -> Self {
        Self { code: EXIT_INPUT, error }
    }

    pub fn invariant(error: anyhow::Error) -> Self {
        Self {
            code: EXIT_INVARIANT,
            error,
        }
    }

    /// Schema and provenance violations are bugs; everything else is
    /// attributed to the input.
    pub fn classify(error: anyhow::Error) -> Self {
        match error.downcast_ref::<CoreError>() {
            Some(CoreError::Implausible(_) | CoreError::MissingProvenance(_)) => Self::invariant(error),
            _ => Self::input(error),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.error)
    }
}
