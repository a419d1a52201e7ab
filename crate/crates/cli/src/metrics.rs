//! Detection metrics (false alarms per 24 h, latency, sensitivity) and
//! value-extraction errors against ground truth.

use measurefirst_core::report::ReportSchema;
use measurefirst_core::signal::synth::GroundTruth;
use measurefirst_core::signal::ClinicalTolerances;
use serde::{Deserialize, Serialize};

/// Predictions within this many seconds of a true onset can match it.
pub const MATCH_WINDOW_S: f64 = 30.0;

/// Greedy one-to-one matching by smallest onset distance; ties go to the
/// earlier truth, then the earlier prediction. Returns `(truth, pred)` pairs.
pub fn match_onsets(truth: &[f64], pred: &[f64], window_s: f64) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, t) in truth.iter().enumerate() {
        for (j, p) in pred.iter().enumerate() {
            let d = (p - t).abs();
            if d <= window_s {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_t, mut used_p) = (vec![false; truth.len()], vec![false; pred.len()]);
    let mut out = Vec::new();
    for (_, i, j) in pairs {
        if !used_t[i] && !used_p[j] {
            used_t[i] = true;
            used_p[j] = true;
            out.push((i, j));
        }
    }
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMatch {
    pub recording: String,
    pub true_onset_s: Option<f64>,
    pub predicted_onset_s: Option<f64>,
    /// Predicted minus true onset.
    pub latency_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub fa_per_24h: f64,
    pub mean_latency_s: Option<f64>,
    pub p95_latency_s: Option<f64>,
    /// `None` when there were no true events.
    pub sensitivity: Option<f64>,
    pub true_events: usize,
    pub predictions: usize,
    pub matched: usize,
    pub false_alarms: usize,
    pub recorded_s: f64,
    pub records: Vec<EventMatch>,
}

#[derive(Debug, Default)]
pub struct DetectionTally {
    records: Vec<EventMatch>,
    recorded_s: f64,
}

impl DetectionTally {
    pub fn add(&mut self, recording: &str, truth: &[f64], pred: &[f64], duration_s: f64) {
        self.recorded_s += duration_s;
        let pairs = match_onsets(truth, pred, MATCH_WINDOW_S);
        for (i, &t) in truth.iter().enumerate() {
            let p = pairs.iter().find(|(a, _)| *a == i).map(|&(_, j)| pred[j]);
            self.records.push(EventMatch {
                recording: recording.to_string(),
                true_onset_s: Some(t),
                predicted_onset_s: p,
                latency_s: p.map(|p| p - t),
            });
        }
        for (j, &p) in pred.iter().enumerate() {
            if !pairs.iter().any(|(_, b)| *b == j) {
                self.records.push(EventMatch {
                    recording: recording.to_string(),
                    true_onset_s: None,
                    predicted_onset_s: Some(p),
                    latency_s: None,
                });
            }
        }
    }

    pub fn finish(self) -> DetectionMetrics {
        let true_events = self.records.iter().filter(|r| r.true_onset_s.is_some()).count();
        let predictions = self.records.iter().filter(|r| r.predicted_onset_s.is_some()).count();
        let mut lat: Vec<f64> = self.records.iter().filter_map(|r| r.latency_s).collect();
        lat.sort_by(f64::total_cmp);
        let matched = lat.len();
        let false_alarms = predictions - matched;
        let fa_per_24h = if self.recorded_s > 0.0 {
            false_alarms as f64 * 86_400.0 / self.recorded_s
        } else {
            0.0
        };
        let p95 = (!lat.is_empty()).then(|| lat[((0.95 * lat.len() as f64).ceil() as usize).clamp(1, lat.len()) - 1]);
        DetectionMetrics {
            fa_per_24h,
            mean_latency_s: (!lat.is_empty()).then(|| lat.iter().sum::<f64>() / matched as f64),
            p95_latency_s: p95,
            sensitivity: (true_events > 0).then(|| matched as f64 / true_events as f64),
            true_events,
            predictions,
            matched,
            false_alarms,
            recorded_s: self.recorded_s,
            records: self.records,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceFlag {
    pub event_id: String,
    pub truth_id: String,
    pub kind: String,
    pub error: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueErrors {
    pub matched: usize,
    pub unmatched_predictions: usize,
    pub unmatched_truths: usize,
    pub frequency_mae_hz: Option<f64>,
    pub duration_mae_s: Option<f64>,
    pub amplitude_mae_uv: Option<f64>,
    /// Matched events whose value was withheld, per kind.
    pub abstained: usize,
    pub flags: Vec<ToleranceFlag>,
}

fn mae(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Findings are paired with truth events by onset. Amplitude is compared
/// with the truth's robust amplitude, the quantity the pipeline reports.
pub fn eval_values(report: &ReportSchema, truth: &GroundTruth, tol: &ClinicalTolerances) -> ValueErrors {
    let t_on: Vec<f64> = truth.events.iter().map(|e| e.onset_s).collect();
    let p_on: Vec<f64> = report.findings.iter().map(|f| f.onset_s.value).collect();
    let pairs = match_onsets(&t_on, &p_on, MATCH_WINDOW_S);
    let (mut fe, mut de, mut ae) = (Vec::new(), Vec::new(), Vec::new());
    let mut flags = Vec::new();
    let mut abstained = 0;
    for &(i, j) in &pairs {
        let (t, f) = (&truth.events[i], &report.findings[j]);
        let mut check = |kind: &str, got: Option<f64>, want: f64, tolerance: f64, sink: &mut Vec<f64>| match got {
            Some(g) => {
                let error = (g - want).abs();
                sink.push(error);
                // Canonical texts carry one decimal; compare with a hair of slack.
                if error > tolerance + 1e-9 {
                    flags.push(ToleranceFlag {
                        event_id: f.event_id.clone(),
                        truth_id: t.id.clone(),
                        kind: kind.to_string(),
                        error,
                        tolerance,
                    });
                }
            }
            None => abstained += 1,
        };
        check("frequency_hz", f.dominant_frequency_hz.as_ref().map(|m| m.value), t.frequency_hz, tol.eps_f_hz, &mut fe);
        check("duration_s", Some(f.duration_s.value), t.duration_s, tol.eps_d_s, &mut de);
        check("amplitude_uv", f.amplitude_uv.as_ref().map(|m| m.value), t.robust_amplitude_uv, tol.eps_a_uv, &mut ae);
    }
    ValueErrors {
        matched: pairs.len(),
        unmatched_predictions: p_on.len() - pairs.len(),
        unmatched_truths: t_on.len() - pairs.len(),
        frequency_mae_hz: mae(&fe),
        duration_mae_s: mae(&de),
        amplitude_mae_uv: mae(&ae),
        abstained,
        flags,
    }
}
