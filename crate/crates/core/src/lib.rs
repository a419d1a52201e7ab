//! Measurement-first EEG analysis core.
//!
//! Clinical values (dominant frequency, event duration, robust amplitude,
//! hemispheric lateralization) are computed by deterministic signal
//! processing and frozen, together with the provenance needed to recompute
//! them, before any learned component sees the data. Reports are generated
//! in two stages: a structured schema whose numeric fields are exclusively
//! frozen measurements, then a narrative produced by a decoder that can only
//! copy those measurements' canonical text.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, metrics and the
//! command-line driver live in the `measurefirst` companion crate.
//!
//! Module map:
//!
//! - [`signal`]: recordings, montage graphs, zero-phase preprocessing,
//!   the synthetic recording generator and orthonormal band power.
//! - [`gating`]: candidate event windows on the low-rate stream and
//!   high-rate crops around them.
//! - [`guardrails`]: Welch PSD, frozen measurements, provenance and
//!   plausibility checks.
//! - [`neural`]: desk-scale forward passes (patching, graph-biased
//!   attention, diagonal SSM scan, heads) and the loss functions.
//! - [`calibration`]: online conformal quantile adjustment with CUSUM
//!   triggered recalibration.
//! - [`report`]: report schema, narrative templates and the slot-copying
//!   decoder.
//! - [`pipeline`]: the end-to-end analysis run and its configuration.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod calibration;
pub mod dsp;
mod error;
pub mod gating;
pub mod guardrails;
pub mod neural;
pub mod pipeline;
pub mod report;
pub mod signal;

pub use error::{Error, Result};

/// Version string recorded in every provenance entry.
pub const ALGORITHM_VERSION: &str = concat!("measurefirst-core/", env!("CARGO_PKG_VERSION"));
