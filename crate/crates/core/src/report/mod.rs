//! Two-stage reports: a schema whose numbers are all frozen measurements,
//! then a narrative decoded under a slot-copy mask.

mod decoder;
mod template;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::guardrails::{canonical_text, FrozenMeasurement, MeasurementKind, Outcome, Provenance};
use crate::{Error, Result};

pub use decoder::{decode, digit_runs, unreferenced_digit_runs, Decoded, MaskEvent, Token, TokenStream};
pub use template::{
    generate_default_narrative, generate_narrative, plan_narrative, NarrativePlan, NarrativeTemplate, Segment,
    TemplateProducer, TemplateSet, Tier,
};

pub const SCHEMA_VERSION: &str = "1.0";

/// Finding fields that may be withheld.
pub const OPTIONAL_FIELDS: [&str; 3] = ["dominant_frequency_hz", "amplitude_uv", "lateralization"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingMeta {
    pub duration_s: f64,
    pub channels: usize,
    pub low_rate_hz: f64,
    pub high_rate_hz: Option<f64>,
}

/// Wire form of a frozen measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Measurement {
    pub value: f64,
    pub text: String,
    pub unit: String,
    pub confidence: f64,
    pub interval: Option<[f64; 2]>,
    pub provenance_id: String,
}

impl Measurement {
    fn from_frozen(m: &FrozenMeasurement, provenance_id: String) -> Self {
        Self {
            value: m.value,
            text: m.canonical_text.clone(),
            unit: m.unit.clone(),
            confidence: m.confidence,
            interval: m.interval.map(|(a, b)| [a, b]),
            provenance_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Finding {
    pub event_id: String,
    pub onset_s: Measurement,
    pub duration_s: Measurement,
    pub dominant_frequency_hz: Option<Measurement>,
    pub amplitude_uv: Option<Measurement>,
    pub lateralization: Option<Measurement>,
    pub detection_confidence: f64,
    pub abstained: Vec<String>,
}

impl Finding {
    /// Field by schema name, with its measurement kind.
    pub fn field(&self, name: &str) -> Option<(MeasurementKind, Option<&Measurement>)> {
        Some(match name {
            "onset_s" => (MeasurementKind::OnsetS, Some(&self.onset_s)),
            "duration_s" => (MeasurementKind::DurationS, Some(&self.duration_s)),
            "dominant_frequency_hz" => (MeasurementKind::FrequencyHz, self.dominant_frequency_hz.as_ref()),
            "amplitude_uv" => (MeasurementKind::AmplitudeUv, self.amplitude_uv.as_ref()),
            "lateralization" => (MeasurementKind::LateralizationIndex, self.lateralization.as_ref()),
            _ => return None,
        })
    }

    pub fn measurements(&self) -> impl Iterator<Item = (MeasurementKind, &Measurement)> {
        ["onset_s", "duration_s", "dominant_frequency_hz", "amplitude_uv", "lateralization"]
            .into_iter()
            .filter_map(|n| match self.field(n) {
                Some((k, Some(m))) => Some((k, m)),
                _ => None,
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Impression {
    NoEvents,
    EventsDetected,
    DegradedQuality,
}

/// Provenance of one measurement, addressable by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvenanceEntry {
    pub id: String,
    pub kind: MeasurementKind,
    /// Canonical text of the measurement this entry produced.
    pub text: String,
    pub method: String,
    pub window: [f64; 2],
    pub channels: Vec<usize>,
    pub parameters: BTreeMap<String, String>,
    pub algorithm_version: String,
}

impl ProvenanceEntry {
    pub fn provenance(&self) -> Provenance {
        Provenance {
            method: self.method.clone(),
            window: (self.window[0], self.window[1]),
            channels: self.channels.clone(),
            parameters: self.parameters.clone(),
            algorithm_version: self.algorithm_version.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSchema {
    pub schema_version: String,
    pub recording: RecordingMeta,
    pub findings: Vec<Finding>,
    pub overall_impression: Impression,
    pub narrative: String,
    pub provenance_log: Vec<ProvenanceEntry>,
}

/// Measurements for one gated event. Onset and duration come from the same
/// segmentation run and share its provenance entry.
#[derive(Debug, Clone, PartialEq)]
pub struct FindingInput {
    pub onset: FrozenMeasurement,
    pub duration: FrozenMeasurement,
    pub frequency: Outcome,
    pub amplitude: Outcome,
    pub lateralization: Outcome,
    pub detection_confidence: f64,
}

fn entry(id: &str, m: &FrozenMeasurement) -> Result<ProvenanceEntry> {
    m.provenance
        .validate()
        .map_err(|e| Error::MissingProvenance(format!("{id}: {e}")))?;
    let p = &m.provenance;
    Ok(ProvenanceEntry {
        id: id.to_string(),
        kind: m.kind,
        text: m.canonical_text.clone(),
        method: p.method.clone(),
        window: [p.window.0, p.window.1],
        channels: p.channels.clone(),
        parameters: p.parameters.clone(),
        algorithm_version: p.algorithm_version.clone(),
    })
}

/// Assembles the schema with an empty narrative. Findings are sorted by
/// onset and numbered from one.
pub fn build_schema(meta: RecordingMeta, mut inputs: Vec<FindingInput>) -> Result<ReportSchema> {
    inputs.sort_by(|a, b| a.onset.value.total_cmp(&b.onset.value));
    let mut findings = Vec::with_capacity(inputs.len());
    let mut log = Vec::new();
    let mut withheld = 0usize;
    for (i, inp) in inputs.iter().enumerate() {
        let event_id = format!("ev-{}", i + 1);
        if inp.onset.kind != MeasurementKind::OnsetS || inp.duration.kind != MeasurementKind::DurationS {
            return Err(Error::Input(format!("{event_id}: onset/duration have the wrong kinds")));
        }
        let seg_id = format!("{event_id}/duration_s");
        log.push(entry(&seg_id, &inp.duration)?);
        let mut abstained = Vec::new();
        let mut optional = |name: &str, kind: MeasurementKind, o: &Outcome| -> Result<Option<Measurement>> {
            if o.kind() != kind {
                return Err(Error::Input(format!("{event_id}: {name} has kind {}", o.kind().as_str())));
            }
            match o.frozen() {
                Some(m) => {
                    let id = format!("{event_id}/{name}");
                    log.push(entry(&id, m)?);
                    Ok(Some(Measurement::from_frozen(m, id)))
                }
                None => {
                    abstained.push(name.to_string());
                    Ok(None)
                }
            }
        };
        let dominant_frequency_hz = optional("dominant_frequency_hz", MeasurementKind::FrequencyHz, &inp.frequency)?;
        let amplitude_uv = optional("amplitude_uv", MeasurementKind::AmplitudeUv, &inp.amplitude)?;
        let lateralization = optional("lateralization", MeasurementKind::LateralizationIndex, &inp.lateralization)?;
        withheld += abstained.len();
        findings.push(Finding {
            onset_s: Measurement::from_frozen(&inp.onset, seg_id.clone()),
            duration_s: Measurement::from_frozen(&inp.duration, seg_id),
            event_id,
            dominant_frequency_hz,
            amplitude_uv,
            lateralization,
            detection_confidence: inp.detection_confidence.clamp(0.0, 1.0),
            abstained,
        });
    }
    let overall_impression = if findings.is_empty() {
        Impression::NoEvents
    } else if 2 * withheld > OPTIONAL_FIELDS.len() * findings.len() {
        Impression::DegradedQuality
    } else {
        Impression::EventsDetected
    };
    let schema = ReportSchema {
        schema_version: SCHEMA_VERSION.to_string(),
        recording: meta,
        findings,
        overall_impression,
        narrative: String::new(),
        provenance_log: log,
    };
    validate_schema(&schema)?;
    Ok(schema)
}

fn check_measurement(ctx: &str, kind: MeasurementKind, m: &Measurement, log: &BTreeMap<&str, &ProvenanceEntry>) -> Result<()> {
    let bad = |msg: String| Err(Error::Implausible(format!("{ctx}: {msg}")));
    if canonical_text(kind, m.value) != m.text || m.text.parse::<f64>().ok() != Some(m.value) {
        return bad(format!("text {:?} does not match value {}", m.text, m.value));
    }
    if m.unit != kind.unit() {
        return bad(format!("unit {:?} should be {:?}", m.unit, kind.unit()));
    }
    if !(0.0..=1.0).contains(&m.confidence) {
        return bad(format!("confidence {} outside [0, 1]", m.confidence));
    }
    if let Some([lo, hi]) = m.interval {
        if !(lo <= m.value && m.value <= hi) {
            return bad(format!("interval [{lo}, {hi}] excludes {}", m.value));
        }
    }
    if !log.contains_key(m.provenance_id.as_str()) {
        return bad(format!("provenance {} not in log", m.provenance_id));
    }
    Ok(())
}

/// Structural and semantic checks beyond what deserialization enforces.
pub fn validate_schema(s: &ReportSchema) -> Result<()> {
    if s.schema_version != SCHEMA_VERSION {
        return Err(Error::Implausible(format!("schema_version {:?}", s.schema_version)));
    }
    let r = &s.recording;
    if !(r.duration_s >= 0.0 && r.low_rate_hz > 0.0 && r.high_rate_hz.map_or(true, |h| h > 0.0)) {
        return Err(Error::Implausible("recording metadata out of range".into()));
    }
    let mut log = BTreeMap::new();
    for e in &s.provenance_log {
        if log.insert(e.id.as_str(), e).is_some() {
            return Err(Error::Implausible(format!("duplicate provenance id {}", e.id)));
        }
        e.provenance().validate()?;
    }
    let mut referenced = BTreeSet::new();
    let mut ids = BTreeSet::new();
    for (i, f) in s.findings.iter().enumerate() {
        if !ids.insert(f.event_id.as_str()) {
            return Err(Error::Implausible(format!("duplicate event id {}", f.event_id)));
        }
        if i > 0 && s.findings[i - 1].onset_s.value > f.onset_s.value {
            return Err(Error::Implausible("findings are not sorted by onset".into()));
        }
        if !(0.0..=1.0).contains(&f.detection_confidence) {
            return Err(Error::Implausible(format!("{}: detection confidence out of range", f.event_id)));
        }
        for name in &f.abstained {
            match f.field(name) {
                Some((_, None)) => {}
                Some((_, Some(_))) => {
                    return Err(Error::Implausible(format!("{}: {name} is abstained but has a value", f.event_id)))
                }
                None => return Err(Error::Implausible(format!("{}: unknown abstained field {name}", f.event_id))),
            }
        }
        for name in OPTIONAL_FIELDS {
            if matches!(f.field(name), Some((_, None))) && !f.abstained.iter().any(|a| a == name) {
                return Err(Error::Implausible(format!("{}: {name} missing without abstention", f.event_id)));
            }
        }
        for (kind, m) in f.measurements() {
            check_measurement(&format!("{}.{}", f.event_id, kind.as_str()), kind, m, &log)?;
            referenced.insert(m.provenance_id.as_str());
            if kind != MeasurementKind::OnsetS && log[m.provenance_id.as_str()].text != m.text {
                return Err(Error::Implausible(format!("{}: provenance text differs", m.provenance_id)));
            }
        }
    }
    if let Some(orphan) = log.keys().find(|k| !referenced.contains(*k)) {
        return Err(Error::Implausible(format!("provenance {orphan} is not referenced")));
    }
    let expected = if s.findings.is_empty() { Impression::NoEvents } else { s.overall_impression };
    if s.overall_impression != expected || (!s.findings.is_empty() && s.overall_impression == Impression::NoEvents) {
        return Err(Error::Implausible("overall impression contradicts findings".into()));
    }
    Ok(())
}
