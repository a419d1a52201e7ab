use measurefirst::metrics::{eval_values, match_onsets, DetectionTally, MATCH_WINDOW_S};
use measurefirst_core::guardrails::{FrozenMeasurement, MeasurementKind, Outcome, Provenance};
use measurefirst_core::report::{build_schema, FindingInput, RecordingMeta, ReportSchema};
use measurefirst_core::signal::synth::{GroundTruth, TruthEvent, Waveform};
use measurefirst_core::signal::ClinicalTolerances;

#[test]
fn nothing_to_match() {
    let mut t = DetectionTally::default();
    t.add("r", &[], &[], 3600.0);
    let m = t.finish();
    assert_eq!(m.fa_per_24h, 0.0);
    assert_eq!(m.sensitivity, None);
    assert_eq!(m.mean_latency_s, None);
}

#[test]
fn one_false_alarm_in_twelve_hours() {
    let mut t = DetectionTally::default();
    t.add("r", &[], &[100.0], 12.0 * 3600.0);
    assert_eq!(t.finish().fa_per_24h, 2.0);
}

#[test]
fn latency_is_prediction_minus_truth() {
    let mut t = DetectionTally::default();
    t.add("r", &[100.0], &[105.0], 3600.0);
    let m = t.finish();
    assert_eq!(m.mean_latency_s, Some(5.0));
    assert_eq!(m.sensitivity, Some(1.0));
    assert_eq!(m.false_alarms, 0);
}

#[test]
fn matching_window_and_one_to_one() {
    assert_eq!(MATCH_WINDOW_S, 30.0);
    assert!(match_onsets(&[100.0], &[131.0], 30.0).is_empty());
    assert_eq!(match_onsets(&[100.0], &[70.0], 30.0), vec![(0, 0)]);
    // Closest pairs first; each side used once.
    let mut m = match_onsets(&[100.0, 110.0], &[108.0], 30.0);
    m.sort();
    assert_eq!(m, vec![(1, 0)]);
    let mut t = DetectionTally::default();
    t.add("r", &[100.0, 110.0], &[108.0, 300.0], 86_400.0);
    let m = t.finish();
    assert_eq!((m.matched, m.false_alarms, m.true_events), (1, 1, 2));
    assert_eq!(m.sensitivity, Some(0.5));
    assert_eq!(m.fa_per_24h, 1.0);
}

fn frozen(kind: MeasurementKind, v: f64) -> FrozenMeasurement {
    FrozenMeasurement::new(kind, v, 0.9, None, Provenance::new("m", (0.0, 1.0), vec![0]).with("k", 1))
}

fn report(freq: f64) -> ReportSchema {
    build_schema(
        RecordingMeta { duration_s: 600.0, channels: 4, low_rate_hz: 256.0, high_rate_hz: None },
        vec![FindingInput {
            onset: frozen(MeasurementKind::OnsetS, 40.0),
            duration: frozen(MeasurementKind::DurationS, 6.0),
            frequency: Outcome::Frozen(frozen(MeasurementKind::FrequencyHz, freq)),
            amplitude: Outcome::Frozen(frozen(MeasurementKind::AmplitudeUv, 50.0)),
            lateralization: Outcome::abstain(MeasurementKind::LateralizationIndex, "x"),
            detection_confidence: 0.9,
        }],
    )
    .unwrap()
}

fn truth() -> GroundTruth {
    GroundTruth {
        duration_s: 600.0,
        events: vec![TruthEvent {
            id: "e1".into(),
            onset_s: 40.0,
            duration_s: 6.0,
            frequency_hz: 3.0,
            amplitude_uv: 70.0,
            robust_amplitude_uv: 50.0,
            channels: vec![0],
            channel_names: vec!["Fp1".into()],
            waveform: Waveform::Sine,
        }],
    }
}

#[test]
fn exact_values_have_zero_error() {
    let v = eval_values(&report(3.0), &truth(), &ClinicalTolerances::default());
    assert_eq!((v.frequency_mae_hz, v.duration_mae_s, v.amplitude_mae_uv), (Some(0.0), Some(0.0), Some(0.0)));
    assert!(v.flags.is_empty());
}

#[test]
fn off_by_two_tenths_is_flagged() {
    let v = eval_values(&report(3.2), &truth(), &ClinicalTolerances::default());
    assert!((v.frequency_mae_hz.unwrap() - 0.2).abs() < 1e-12);
    assert_eq!(v.flags.len(), 1);
    assert_eq!(v.flags[0].kind, "frequency_hz");
}
