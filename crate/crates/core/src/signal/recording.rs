use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::MontageGraph;
use crate::{Error, Result};

/// One sampled stream: `channels[c][k]` is channel `c` at time
/// `start_time + k / rate_hz`, in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    rate_hz: f64,
    channels: Vec<Vec<f64>>,
}

impl Stream {
    pub fn new(rate_hz: f64, channels: Vec<Vec<f64>>) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::Recording(format!("sample rate must be positive, got {rate_hz}")));
        }
        let Some(first) = channels.first() else {
            return Err(Error::Recording("stream has no channels".into()));
        };
        let len = first.len();
        if len == 0 {
            return Err(Error::Recording("stream has no samples".into()));
        }
        for (c, ch) in channels.iter().enumerate() {
            if ch.len() != len {
                return Err(Error::Recording(format!(
                    "channel {c} has {} samples, expected {len}",
                    ch.len()
                )));
            }
            if let Some(k) = ch.iter().position(|v| !v.is_finite()) {
                return Err(Error::Recording(format!("non-finite sample at channel {c}, index {k}")));
            }
        }
        Ok(Self { rate_hz, channels })
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.rate_hz
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }
}

/// Which of the two synchronized streams a computation ran on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamId {
    Low,
    High,
}

impl StreamId {
    pub fn as_str(self) -> &'static str {
        match self {
            StreamId::Low => "low",
            StreamId::High => "high",
        }
    }
}

/// Synchronized dual-rate multi-channel recording with its montage.
///
/// Immutable after construction; processing steps return new recordings
/// and append to [`Recording::notes`].
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    channel_names: Vec<String>,
    low: Stream,
    high: Option<Stream>,
    start_time_s: f64,
    montage: MontageGraph,
    notes: Vec<String>,
}

impl Recording {
    pub fn new(
        channel_names: Vec<String>,
        low: Stream,
        high: Option<Stream>,
        start_time_s: f64,
        montage: MontageGraph,
    ) -> Result<Self> {
        let c = channel_names.len();
        if c == 0 {
            return Err(Error::Recording("recording needs at least one channel".into()));
        }
        if low.n_channels() != c {
            return Err(Error::Recording(format!(
                "low-rate stream has {} channels, expected {c}",
                low.n_channels()
            )));
        }
        if let Some(high) = &high {
            if high.n_channels() != c {
                return Err(Error::Recording(format!(
                    "high-rate stream has {} channels, expected {c}",
                    high.n_channels()
                )));
            }
            if high.rate_hz() <= low.rate_hz() {
                return Err(Error::Recording(format!(
                    "high rate {} Hz must exceed low rate {} Hz",
                    high.rate_hz(),
                    low.rate_hz()
                )));
            }
        }
        if !start_time_s.is_finite() {
            return Err(Error::Recording("start time must be finite".into()));
        }
        if montage.n_nodes() != c {
            return Err(Error::Recording(format!(
                "montage covers {} nodes, recording has {c} channels",
                montage.n_nodes()
            )));
        }
        Ok(Self {
            channel_names,
            low,
            high,
            start_time_s,
            montage,
            notes: Vec::new(),
        })
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn n_channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn low(&self) -> &Stream {
        &self.low
    }

    pub fn high(&self) -> Option<&Stream> {
        self.high.as_ref()
    }

    pub fn stream(&self, id: StreamId) -> Option<&Stream> {
        match id {
            StreamId::Low => Some(&self.low),
            StreamId::High => self.high.as_ref(),
        }
    }

    pub fn start_time_s(&self) -> f64 {
        self.start_time_s
    }

    pub fn montage(&self) -> &MontageGraph {
        &self.montage
    }

    /// Length of the low-rate stream in seconds.
    pub fn duration_s(&self) -> f64 {
        self.low.duration_s()
    }

    /// Processing notes attached by the steps that produced this value.
    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub(crate) fn replace_streams(&self, low: Stream, high: Option<Stream>) -> Self {
        Self {
            channel_names: self.channel_names.clone(),
            low,
            high,
            start_time_s: self.start_time_s,
            montage: self.montage.clone(),
            notes: self.notes.clone(),
        }
    }

    pub fn with_montage(mut self, montage: MontageGraph) -> Result<Self> {
        if montage.n_nodes() != self.n_channels() {
            return Err(Error::Recording(format!(
                "montage covers {} nodes, recording has {} channels",
                montage.n_nodes(),
                self.n_channels()
            )));
        }
        self.montage = montage;
        Ok(self)
    }
}

/// Clinical tolerances a measurement must meet to be considered exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClinicalTolerances {
    pub eps_f_hz: f64,
    pub eps_d_s: f64,
    pub eps_a_uv: f64,
}

impl Default for ClinicalTolerances {
    fn default() -> Self {
        Self {
            eps_f_hz: 0.1,
            eps_d_s: 0.5,
            eps_a_uv: 5.0,
        }
    }
}

impl ClinicalTolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps_f_hz", self.eps_f_hz),
            ("eps_d_s", self.eps_d_s),
            ("eps_a_uv", self.eps_a_uv),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be strictly positive")));
            }
        }
        Ok(())
    }
}
