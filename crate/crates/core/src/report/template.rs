//! Narrative templates with typed placeholders, confidence tiers, and the
//! default template-driven token producer.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::decoder::{decode, Decoded, Token, TokenStream};
use super::{Finding, Impression, ReportSchema};
use crate::guardrails::MeasurementKind;
use crate::{Error, Result};

/// Short placeholder names accepted besides the full field names.
const ALIASES: [(&str, &str); 5] = [
    ("onset", "onset_s"),
    ("d", "duration_s"),
    ("f", "dominant_frequency_hz"),
    ("a", "amplitude_uv"),
    ("lat", "lateralization"),
];

const PUNCT: &[char] = &['.', ',', ';', ':', '(', ')', '!', '?'];

fn resolve(name: &str) -> &str {
    ALIASES.iter().find(|(a, _)| *a == name).map_or(name, |(_, f)| f)
}

fn field_kind(field: &str) -> Option<MeasurementKind> {
    Some(match field {
        "onset_s" => MeasurementKind::OnsetS,
        "duration_s" => MeasurementKind::DurationS,
        "dominant_frequency_hz" => MeasurementKind::FrequencyHz,
        "amplitude_uv" => MeasurementKind::AmplitudeUv,
        "lateralization" => MeasurementKind::LateralizationIndex,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Text(String),
    Slot(&'static str),
}

fn static_field(field: &str) -> &'static str {
    match field {
        "onset_s" => "onset_s",
        "duration_s" => "duration_s",
        "dominant_frequency_hz" => "dominant_frequency_hz",
        "amplitude_uv" => "amplitude_uv",
        _ => "lateralization",
    }
}

/// `{name:kind}` placeholders inside literal text.
fn parse_clause(clause: &str) -> Result<Vec<Piece>> {
    let mut pieces = Vec::new();
    let mut rest = clause;
    while let Some(open) = rest.find('{') {
        let (lit, tail) = rest.split_at(open);
        let close = tail
            .find('}')
            .ok_or_else(|| Error::Template(format!("unclosed placeholder in {clause:?}")))?;
        let inner = &tail[1..close];
        let (name, kind) = inner
            .split_once(':')
            .ok_or_else(|| Error::Template(format!("placeholder {{{inner}}} needs name:kind")))?;
        let field = resolve(name.trim());
        let expected =
            field_kind(field).ok_or_else(|| Error::Template(format!("placeholder {name} names no report field")))?;
        let kind = MeasurementKind::parse(kind.trim())
            .ok_or_else(|| Error::Template(format!("unknown measurement kind {kind:?}")))?;
        if kind != expected {
            return Err(Error::Template(format!(
                "placeholder {name} is a {} slot, not {}",
                expected.as_str(),
                kind.as_str()
            )));
        }
        if !lit.is_empty() {
            pieces.push(Piece::Text(lit.to_string()));
        }
        pieces.push(Piece::Slot(static_field(field)));
        rest = &tail[close + 1..];
    }
    if rest.contains('}') {
        return Err(Error::Template(format!("stray closing brace in {clause:?}")));
    }
    if !rest.is_empty() {
        pieces.push(Piece::Text(rest.to_string()));
    }
    for p in &pieces {
        if let Piece::Text(t) = p {
            if t.chars().any(|c| c.is_ascii_digit()) {
                return Err(Error::Template(format!("literal digits in {clause:?}")));
            }
        }
    }
    Ok(pieces)
}

/// Sentences rendered in order; a sentence whose slot was abstained is
/// dropped whole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NarrativeTemplate {
    pub clauses: Vec<String>,
}

impl NarrativeTemplate {
    pub fn new(clauses: &[&str]) -> Self {
        Self {
            clauses: clauses.iter().map(|c| c.to_string()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.clauses.iter().try_for_each(|c| parse_clause(c).map(|_| ()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    High,
    Medium,
    Low,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateSet {
    pub high_threshold: f64,
    pub medium_threshold: f64,
    pub high: NarrativeTemplate,
    pub medium: NarrativeTemplate,
    pub low: NarrativeTemplate,
    pub no_events: NarrativeTemplate,
    pub degraded: NarrativeTemplate,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self {
            high_threshold: 0.8,
            medium_threshold: 0.5,
            high: NarrativeTemplate::new(&[
                "An event begins at {onset:onset_s} s and lasts {d:duration_s} s.",
                "Dominant frequency {f:frequency_hz} Hz.",
                "Robust amplitude {a:amplitude_uv} µV.",
                "Lateralization index {lat:lateralization_index}, positive toward the left hemisphere.",
            ]),
            medium: NarrativeTemplate::new(&[
                "A probable event begins at {onset:onset_s} s and lasts {d:duration_s} s.",
                "The dominant frequency is {f:frequency_hz} Hz.",
                "Robust amplitude is {a:amplitude_uv} µV.",
                "Lateralization index {lat:lateralization_index}, positive toward the left hemisphere.",
            ]),
            low: NarrativeTemplate::new(&[
                "A possible event near {onset:onset_s} s, lasting about {d:duration_s} s, needs review.",
                "Its frequency estimate of {f:frequency_hz} Hz is uncertain.",
                "Its amplitude estimate of {a:amplitude_uv} µV is uncertain.",
            ]),
            no_events: NarrativeTemplate::new(&["No events were detected."]),
            degraded: NarrativeTemplate::new(&[
                "Several measurements were withheld after failing plausibility checks.",
            ]),
        }
    }
}

impl TemplateSet {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.medium_threshold)
            || !(0.0..=1.0).contains(&self.high_threshold)
            || self.medium_threshold > self.high_threshold
        {
            return Err(Error::Config("tier thresholds must satisfy 0 <= medium <= high <= 1".into()));
        }
        for t in [&self.high, &self.medium, &self.low, &self.no_events, &self.degraded] {
            t.validate()?;
        }
        for t in [&self.no_events, &self.degraded] {
            if t.clauses.iter().any(|c| c.contains('{')) {
                return Err(Error::Template("summary templates take no placeholders".into()));
            }
        }
        Ok(())
    }

    pub fn tier(&self, confidence: f64) -> Tier {
        if confidence >= self.high_threshold {
            Tier::High
        } else if confidence >= self.medium_threshold {
            Tier::Medium
        } else {
            Tier::Low
        }
    }

    pub fn select(&self, confidence: f64) -> &NarrativeTemplate {
        match self.tier(confidence) {
            Tier::High => &self.high,
            Tier::Medium => &self.medium,
            Tier::Low => &self.low,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    Text(String),
    /// Qualified slot name, `<event_id>.<field>`.
    Slot(String),
}

/// Resolved narrative: what to say and which slot texts may be copied.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NarrativePlan {
    pub segments: Vec<Segment>,
    pub slots: BTreeMap<String, String>,
}

fn plan_finding(f: &Finding, t: &NarrativeTemplate, plan: &mut NarrativePlan) -> Result<()> {
    for clause in &t.clauses {
        let pieces = parse_clause(clause)?;
        let available = pieces.iter().all(|p| match p {
            Piece::Slot(field) => matches!(f.field(field), Some((_, Some(_)))),
            Piece::Text(_) => true,
        });
        if !available {
            continue;
        }
        for p in pieces {
            match p {
                Piece::Text(t) => plan.segments.push(Segment::Text(t)),
                Piece::Slot(field) => {
                    let Some((_, Some(m))) = f.field(field) else { unreachable!() };
                    let name = format!("{}.{field}", f.event_id);
                    plan.slots.insert(name.clone(), m.text.clone());
                    plan.segments.push(Segment::Slot(name));
                }
            }
        }
    }
    Ok(())
}

pub fn plan_narrative(schema: &ReportSchema, set: &TemplateSet) -> Result<NarrativePlan> {
    set.validate()?;
    let mut plan = NarrativePlan::default();
    for f in &schema.findings {
        plan_finding(f, set.select(f.detection_confidence), &mut plan)?;
    }
    let summary = match schema.overall_impression {
        Impression::NoEvents => Some(&set.no_events),
        Impression::DegradedQuality => Some(&set.degraded),
        Impression::EventsDetected => None,
    };
    if let Some(t) = summary {
        for c in &t.clauses {
            plan.segments.push(Segment::Text(c.clone()));
        }
    }
    Ok(plan)
}

fn tokenize(text: &str, out: &mut Vec<Token>) {
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut Vec<Token>| {
        if !word.is_empty() {
            out.push(Token::Word(core::mem::take(word)));
        }
    };
    for c in text.chars() {
        if c.is_whitespace() {
            flush(&mut word, out);
        } else if PUNCT.contains(&c) {
            flush(&mut word, out);
            out.push(Token::Punct(c.to_string()));
        } else {
            word.push(c);
        }
    }
    flush(&mut word, out);
}

/// Deterministic token source that follows the plan exactly.
#[derive(Debug, Clone)]
pub struct TemplateProducer {
    tokens: vec::IntoIter<Token>,
}

impl TemplateProducer {
    pub fn new(plan: &NarrativePlan) -> Self {
        let mut tokens = Vec::new();
        for s in &plan.segments {
            match s {
                Segment::Text(t) => tokenize(t, &mut tokens),
                Segment::Slot(name) => {
                    tokens.push(Token::SlotOpen(name.clone()));
                    tokens.push(Token::Numeric(plan.slots[name].clone()));
                    tokens.push(Token::SlotClose);
                }
            }
        }
        Self {
            tokens: tokens.into_iter(),
        }
    }
}

impl Iterator for TemplateProducer {
    type Item = Token;

    fn next(&mut self) -> Option<Token> {
        self.tokens.next()
    }
}

/// Narrative for `schema` from an arbitrary token source.
pub fn generate_narrative(schema: &ReportSchema, set: &TemplateSet, tokens: &mut dyn TokenStream) -> Result<(NarrativePlan, Decoded)> {
    let plan = plan_narrative(schema, set)?;
    let decoded = decode(tokens, &plan.slots);
    Ok((plan, decoded))
}

pub fn generate_default_narrative(schema: &ReportSchema, set: &TemplateSet) -> Result<Decoded> {
    let plan = plan_narrative(schema, set)?;
    Ok(decode(&mut TemplateProducer::new(&plan), &plan.slots))
}
