//! Recordings, preprocessing, synthetic data and band power.

pub mod bandpower;
pub mod filter;
mod montage;
mod recording;
pub mod synth;

pub use bandpower::{bandpower_orthonormal, BandPower};
pub use filter::{preprocess, preprocess_channel};
pub use montage::{standard_channel_names, BiasKind, Hemisphere, MontageGraph};
pub use recording::{ClinicalTolerances, Recording, Stream, StreamId};
pub use synth::{synthesize, GroundTruth, SynthSpec};
