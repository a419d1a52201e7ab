//! Numeric building blocks shared by the signal, gating and guardrail code.

pub mod fft;
pub mod rng;
pub mod spectrum;
pub mod stats;

pub use fft::FftPlan;
