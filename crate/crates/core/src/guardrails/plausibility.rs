use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::{FrozenMeasurement, MeasurementKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum Plausibility {
    Pass,
    /// First violation: measure again on a wider window.
    ReMeasure(String),
    /// Repeated violation: withhold the value.
    Abstain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlausibilityLimits {
    pub frequency_hz: (f64, f64),
    /// Band the frequency was searched in; a value outside it is inconsistent.
    pub analysis_band_hz: Option<(f64, f64)>,
}

impl Default for PlausibilityLimits {
    fn default() -> Self {
        Self {
            frequency_hz: (0.5, 80.0),
            analysis_band_hz: None,
        }
    }
}

fn violation(m: &FrozenMeasurement, limits: &PlausibilityLimits) -> Option<String> {
    let v = m.value;
    if !v.is_finite() {
        return Some(format!("{} is not finite", m.kind.as_str()));
    }
    if !(0.0..=1.0).contains(&m.confidence) {
        return Some(format!("confidence {} outside [0, 1]", m.confidence));
    }
    if let Some((lo, hi)) = m.interval {
        if !(lo <= v && v <= hi) {
            return Some(format!("interval [{lo}, {hi}] excludes value {v}"));
        }
    }
    if m.canonical_text.parse::<f64>().ok() != Some(v) {
        return Some(format!("canonical text {:?} does not denote {v}", m.canonical_text));
    }
    match m.kind {
        MeasurementKind::FrequencyHz => {
            let (lo, hi) = limits.frequency_hz;
            if !(lo..=hi).contains(&v) {
                return Some(format!("frequency {v} Hz outside [{lo}, {hi}]"));
            }
            if let Some((blo, bhi)) = limits.analysis_band_hz {
                if !(blo..=bhi).contains(&v) {
                    return Some(format!("frequency {v} Hz outside analysis band [{blo}, {bhi}]"));
                }
            }
        }
        MeasurementKind::DurationS if v <= 0.0 => return Some(format!("duration {v} s is not positive")),
        MeasurementKind::AmplitudeUv if v < 0.0 => return Some(format!("amplitude {v} µV is negative")),
        MeasurementKind::LateralizationIndex if !(-1.0..=1.0).contains(&v) => {
            return Some(format!("lateralization {v} outside [-1, 1]"))
        }
        MeasurementKind::OnsetS if v < 0.0 => return Some(format!("onset {v} s is negative")),
        _ => {}
    }
    None
}

/// Checks the measurement invariants. `prior_violations` counts earlier
/// failed attempts for the same quantity.
pub fn check_plausibility(m: &FrozenMeasurement, prior_violations: u32, limits: &PlausibilityLimits) -> Plausibility {
    match violation(m, limits) {
        None => Plausibility::Pass,
        Some(reason) if prior_violations == 0 => Plausibility::ReMeasure(reason),
        Some(reason) => Plausibility::Abstain(reason),
    }
}
