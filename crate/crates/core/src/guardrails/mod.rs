//! Exact clinical measurements with provenance.
//!
//! Everything here runs before any learned component. A measurement leaves
//! this module as a [`FrozenMeasurement`] whose `canonical_text` is the only
//! form the report layer may copy.

mod measure;
mod plausibility;
mod welch;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use measure::{
    dominant_frequency, envelope_baseline, estimate_duration, event_amplitude, event_duration, lateralization,
    rms_envelope, robust_amplitude, DurationEstimate, HysteresisConfig, FREQUENCY_METHOD,
};
pub use plausibility::{check_plausibility, Plausibility, PlausibilityLimits};
pub use welch::{welch_psd, Psd, WelchConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    FrequencyHz,
    DurationS,
    AmplitudeUv,
    LateralizationIndex,
    /// Event onset, seconds from recording start.
    OnsetS,
}

impl MeasurementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MeasurementKind::FrequencyHz => "frequency_hz",
            MeasurementKind::DurationS => "duration_s",
            MeasurementKind::AmplitudeUv => "amplitude_uv",
            MeasurementKind::LateralizationIndex => "lateralization_index",
            MeasurementKind::OnsetS => "onset_s",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "frequency_hz" => MeasurementKind::FrequencyHz,
            "duration_s" => MeasurementKind::DurationS,
            "amplitude_uv" => MeasurementKind::AmplitudeUv,
            "lateralization_index" => MeasurementKind::LateralizationIndex,
            "onset_s" => MeasurementKind::OnsetS,
            _ => return None,
        })
    }

    /// Decimal places in the canonical text.
    pub fn decimals(self) -> usize {
        match self {
            MeasurementKind::FrequencyHz | MeasurementKind::DurationS | MeasurementKind::OnsetS => 1,
            MeasurementKind::AmplitudeUv => 0,
            MeasurementKind::LateralizationIndex => 2,
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            MeasurementKind::FrequencyHz => "Hz",
            MeasurementKind::DurationS | MeasurementKind::OnsetS => "s",
            MeasurementKind::AmplitudeUv => "µV",
            MeasurementKind::LateralizationIndex => "",
        }
    }
}

/// Decimal text of `value` at the kind's precision. Rounding is
/// half-to-even on the exact binary value; negative zero prints as zero.
pub fn canonical_text(kind: MeasurementKind, value: f64) -> String {
    let s = format!("{:.*}", kind.decimals(), value);
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

fn round_outward(kind: MeasurementKind, lo: f64, hi: f64) -> (f64, f64) {
    let scale = libm::pow(10.0, kind.decimals() as f64);
    (libm::floor(lo * scale) / scale, libm::ceil(hi * scale) / scale)
}

/// Everything needed to re-run a measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    /// Seconds from recording start.
    pub window: (f64, f64),
    pub channels: Vec<usize>,
    pub parameters: BTreeMap<String, String>,
    pub algorithm_version: String,
}

impl Provenance {
    pub fn new(method: impl Into<String>, window: (f64, f64), channels: Vec<usize>) -> Self {
        Self {
            method: method.into(),
            window,
            channels,
            parameters: BTreeMap::new(),
            algorithm_version: crate::ALGORITHM_VERSION.to_string(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.parameters.get(key).map(String::as_str)
    }

    pub fn param_f64(&self, key: &str) -> Result<f64> {
        self.param(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::MissingProvenance(format!("parameter {key} missing or not numeric")))
    }

    pub fn param_usize(&self, key: &str) -> Result<usize> {
        self.param(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::MissingProvenance(format!("parameter {key} missing or not an integer")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.method.is_empty() || self.algorithm_version.is_empty() {
            return Err(Error::MissingProvenance("method and algorithm version are required".into()));
        }
        if self.channels.is_empty() {
            return Err(Error::MissingProvenance(format!("{}: no channels recorded", self.method)));
        }
        if self.parameters.is_empty() {
            return Err(Error::MissingProvenance(format!("{}: no parameters recorded", self.method)));
        }
        if !(self.window.0.is_finite() && self.window.1.is_finite() && self.window.0 <= self.window.1) {
            return Err(Error::MissingProvenance(format!("{}: invalid window", self.method)));
        }
        Ok(())
    }
}

/// One clinical value. `value` is the number `canonical_text` denotes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenMeasurement {
    pub kind: MeasurementKind,
    pub value: f64,
    pub unit: String,
    pub confidence: f64,
    pub interval: Option<(f64, f64)>,
    pub provenance: Provenance,
    pub canonical_text: String,
}

impl FrozenMeasurement {
    /// Freezes `raw`: the canonical text is fixed first and the stored value
    /// is parsed back from it. An interval is widened outward to the same
    /// precision so it still contains the rounded value.
    pub fn new(
        kind: MeasurementKind,
        raw: f64,
        confidence: f64,
        interval: Option<(f64, f64)>,
        provenance: Provenance,
    ) -> Self {
        let canonical_text = canonical_text(kind, raw);
        let value = canonical_text.parse().unwrap_or(raw);
        let interval = interval.map(|(lo, hi)| round_outward(kind, lo.min(raw), hi.max(raw)));
        Self {
            kind,
            value,
            unit: kind.unit().to_string(),
            confidence: confidence.clamp(0.0, 1.0),
            interval,
            provenance,
            canonical_text,
        }
    }
}

/// A measurement or the reason it was withheld.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Frozen(FrozenMeasurement),
    Abstained { kind: MeasurementKind, reason: String },
}

impl Outcome {
    pub fn abstain(kind: MeasurementKind, reason: impl Into<String>) -> Self {
        Outcome::Abstained {
            kind,
            reason: reason.into(),
        }
    }

    pub fn kind(&self) -> MeasurementKind {
        match self {
            Outcome::Frozen(m) => m.kind,
            Outcome::Abstained { kind, .. } => *kind,
        }
    }

    pub fn frozen(&self) -> Option<&FrozenMeasurement> {
        match self {
            Outcome::Frozen(m) => Some(m),
            Outcome::Abstained { .. } => None,
        }
    }

    pub fn into_frozen(self) -> Option<FrozenMeasurement> {
        match self {
            Outcome::Frozen(m) => Some(m),
            Outcome::Abstained { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_rounding_is_half_even() {
        use MeasurementKind::*;
        assert_eq!(canonical_text(FrequencyHz, 0.25), "0.2");
        assert_eq!(canonical_text(FrequencyHz, 0.35), "0.3"); // 0.35 is stored below the tie
        assert_eq!(canonical_text(AmplitudeUv, 2.5), "2");
        assert_eq!(canonical_text(AmplitudeUv, 3.5), "4");
        assert_eq!(canonical_text(LateralizationIndex, -0.001), "0.00");
        assert_eq!(canonical_text(LateralizationIndex, -0.5), "-0.50");
        assert_eq!(canonical_text(DurationS, 12.0), "12.0");
    }

    #[test]
    fn value_round_trips_through_text() {
        let p = Provenance::new("test", (0.0, 1.0), alloc::vec![0]).with("k", 1);
        for raw in [3.04999, 2.96, 0.05, 117.3, 1e-9] {
            let m = FrozenMeasurement::new(MeasurementKind::FrequencyHz, raw, 0.5, Some((raw - 0.01, raw + 0.01)), p.clone());
            assert_eq!(m.value, m.canonical_text.parse::<f64>().unwrap());
            let (lo, hi) = m.interval.unwrap();
            assert!(lo <= m.value && m.value <= hi);
        }
    }

    #[test]
    fn provenance_requires_fields() {
        assert!(Provenance::new("m", (0.0, 1.0), alloc::vec![]).with("a", 1).validate().is_err());
        assert!(Provenance::new("m", (0.0, 1.0), alloc::vec![1]).validate().is_err());
        assert!(Provenance::new("m", (0.0, 1.0), alloc::vec![1]).with("a", 1).validate().is_ok());
    }
}
