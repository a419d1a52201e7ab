use std::path::Path;
use std::process::Command;

use measurefirst::commands::{cmd_analyze, AnalyzeArgs};
use measurefirst::config::RunConfig;
use measurefirst::{Failure, EXIT_INPUT, EXIT_INVARIANT};
use measurefirst_core::report::{Impression, ReportSchema};
use measurefirst_core::signal::synth::GroundTruth;
use serde_json::json;
use tempfile::tempdir;

const CHANNELS: [&str; 8] = ["Fp1", "Fp2", "F3", "F4", "C3", "C4", "O1", "O2"];

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_measurefirst"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_spec(dir: &Path, name: &str, spec: serde_json::Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, spec.to_string()).unwrap();
    p.to_str().unwrap().to_string()
}

fn one_event_spec(duration_s: f64) -> serde_json::Value {
    json!({
        "duration_s": duration_s, "low_rate_hz": 256.0, "high_rate_hz": 1024.0, "channels": CHANNELS, "seed": 11,
        "noise": {"white_sigma_uv": 4.0, "pink_fraction": 0.3},
        "events": [{"onset_s": duration_s / 2.0, "duration_s": 6.0, "frequency_hz": 3.0, "amplitude_uv": 70.0, "channels": [0, 2, 4, 6]}]
    })
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let dir = tempdir().unwrap();
    let spec = write_spec(dir.path(), "s.json", one_event_spec(60.0));
    for out in ["a", "b"] {
        assert_eq!(run(&["synth", "--spec", &spec, "--out", p(&dir.path().join(out))]).0, 0);
    }
    for f in ["recording.json", "recording.low.eegr", "recording.high.eegr", "ground_truth.json"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(a, std::fs::read(dir.path().join("b").join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn synth_accepts_toml_and_empty_event_lists() {
    let dir = tempdir().unwrap();
    let spec = dir.path().join("s.toml");
    std::fs::write(&spec, "duration_s = 10.0\nlow_rate_hz = 128.0\nchannels = [\"C3\", \"C4\"]\nseed = 1\n").unwrap();
    assert_eq!(run(&["synth", "--spec", p(&spec), "--out", p(&dir.path().join("o"))]).0, 0);
    let gt: GroundTruth = serde_json::from_slice(&std::fs::read(dir.path().join("o/ground_truth.json")).unwrap()).unwrap();
    assert!(gt.events.is_empty());
}

#[test]
fn invalid_specs_exit_with_input_code() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("o");
    let bad = write_spec(dir.path(), "bad.json", json!({"duration_s": -1.0, "low_rate_hz": 256.0, "channels": ["C3"], "seed": 1}));
    let (code, _, err) = run(&["synth", "--spec", &bad, "--out", p(&out)]);
    assert_eq!(code, EXIT_INPUT as i32);
    assert!(err.starts_with("error:"));
    let unknown = write_spec(dir.path(), "u.json", json!({"duration_s": 1.0, "low_rate_hz": 256.0, "channels": ["C3"], "seed": 1, "sead": 2}));
    assert_eq!(run(&["synth", "--spec", &unknown, "--out", p(&out)]).0, EXIT_INPUT as i32);
    assert_eq!(run(&["synth", "--spec", p(&dir.path().join("missing.json")), "--out", p(&out)]).0, EXIT_INPUT as i32);
}

#[test]
fn day_long_recording_has_the_expected_size() {
    let dir = tempdir().unwrap();
    let names: Vec<String> = (0..16).map(|i| format!("X{i}")).collect();
    let spec = write_spec(dir.path(), "s.json", json!({"duration_s": 86400.0, "low_rate_hz": 256.0, "channels": names, "seed": 2, "noise": {"white_sigma_uv": 5.0}}));
    assert_eq!(run(&["synth", "--spec", &spec, "--out", p(&dir.path().join("o"))]).0, 0);
    let size = std::fs::metadata(dir.path().join("o/recording.low.eegr")).unwrap().len();
    let expected = 16u64 * 86_400 * 256 * 4;
    assert!(size.abs_diff(expected) <= 1024, "{size} vs {expected}");
}

#[test]
fn analyze_reports_the_injected_event() {
    let dir = tempdir().unwrap();
    let spec = write_spec(dir.path(), "s.json", one_event_spec(3600.0));
    let rec = dir.path().join("rec");
    run(&["synth", "--spec", &spec, "--out", p(&rec)]);
    let out = dir.path().join("out");
    let (code, stdout, err) = run(&["analyze", "--input", p(&rec.join("recording.json")), "--out", p(&out), "--timestamp", "2026-01-01T00:00:00Z"]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("analysed in"));
    let report: ReportSchema = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.findings.len(), 1);
    assert_eq!(report.findings[0].dominant_frequency_hz.as_ref().unwrap().text, "3.0");
    let narrative = std::fs::read_to_string(out.join("narrative.txt")).unwrap();
    assert_eq!(narrative.trim_end(), report.narrative);
    assert!(narrative.contains("3.0 Hz"));
    for f in ["provenance.json", "run.json", "calibration.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }

    let (code, table, _) = run(&["eval-values", "--pred", p(&out.join("report.json")), "--truth", p(&rec.join("ground_truth.json"))]);
    assert_eq!(code, 0);
    assert!(table.contains("matched 1") && table.contains("frequency Hz"));

    let bench = dir.path().join("bench.json");
    assert_eq!(run(&["bench", "--data", p(dir.path()), "--out", p(&bench)]).0, 0);
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(bench).unwrap()).unwrap();
    assert_eq!(m["sensitivity"], 1.0);
    assert_eq!(m["fa_per_24h"], 0.0);
}

#[test]
fn pure_noise_has_no_events() {
    let dir = tempdir().unwrap();
    let spec = write_spec(dir.path(), "s.json", json!({"duration_s": 300.0, "low_rate_hz": 256.0, "channels": CHANNELS, "seed": 4, "noise": {"white_sigma_uv": 6.0, "pink_fraction": 0.5}}));
    run(&["synth", "--spec", &spec, "--out", p(&dir.path().join("rec"))]);
    let out = dir.path().join("out");
    assert_eq!(run(&["analyze", "--input", p(&dir.path().join("rec/recording.json")), "--out", p(&out)]).0, 0);
    let report: ReportSchema = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.overall_impression, Impression::NoEvents);
    assert_eq!(report.narrative, "No events were detected.");
}

#[test]
fn analyze_is_deterministic_given_seed_and_timestamp() {
    let dir = tempdir().unwrap();
    let spec = write_spec(dir.path(), "s.json", one_event_spec(120.0));
    let rec = dir.path().join("rec");
    run(&["synth", "--spec", &spec, "--out", p(&rec)]);
    let input = rec.join("recording.json");
    let go = |out: &str, seed: &str| {
        let o = dir.path().join(out);
        let (code, _, err) = run(&["analyze", "--input", p(&input), "--out", p(&o), "--seed", seed, "--timestamp", "2026-03-04T05:06:07Z"]);
        assert_eq!(code, 0, "{err}");
        o
    };
    let (a, b, c) = (go("a", "5"), go("b", "5"), go("c", "6"));
    for f in ["report.json", "narrative.txt", "provenance.json", "calibration.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    // The seed only drives the forecaster; measurements do not depend on it.
    assert_eq!(std::fs::read(a.join("report.json")).unwrap(), std::fs::read(c.join("report.json")).unwrap());
    assert_ne!(std::fs::read(a.join("calibration.json")).unwrap(), std::fs::read(c.join("calibration.json")).unwrap());
    let run_a: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("run.json")).unwrap()).unwrap();
    assert_eq!(run_a["timestamp"], "2026-03-04T05:06:07Z");
    assert_eq!(run_a["seed"], 5);
}

#[test]
fn analyze_reads_csv_and_edf() {
    let dir = tempdir().unwrap();
    let n = 30 * 128;
    let ch: Vec<Vec<f64>> = (0..4)
        .map(|c| (0..n).map(|i| ((i * 31 + c * 17) % 97) as f64 * 0.2 - 9.7 + if c < 2 && (1280..2048).contains(&i) { 60.0 * (i as f64 * 0.2).sin() } else { 0.0 }).collect())
        .collect();
    let names = ["C3", "C4", "P3", "P4"];
    measurefirst::edf::write_edf(&dir.path().join("r.edf"), &names, 128, &ch).unwrap();
    let mut csv = String::from("time,C3,C4,P3,P4\n");
    for i in 0..n {
        csv += &format!("{},{},{},{},{}\n", i as f64 / 128.0, ch[0][i], ch[1][i], ch[2][i], ch[3][i]);
    }
    std::fs::write(dir.path().join("r.csv"), csv).unwrap();
    let input = |f: &str| dir.path().join(f);
    // The default 80 Hz band edge is above Nyquist at 128 Hz.
    let (code, _, err) = run(&["analyze", "--input", p(&input("r.edf")), "--out", p(&input("o"))]);
    assert_eq!(code, EXIT_INPUT as i32);
    assert!(err.contains("Nyquist"), "{err}");
    let cfg = dir.path().join("slow.toml");
    std::fs::write(&cfg, "[guardrails]\nnotch_hz = false\nband_hz = [0.5, 40.0]\nfrequency_band_hz = [0.5, 40.0]\n").unwrap();
    for f in ["r.edf", "r.csv"] {
        let out = dir.path().join(format!("out-{f}"));
        let (code, _, err) = run(&["analyze", "--input", p(&input(f)), "--config", p(&cfg), "--out", p(&out)]);
        assert_eq!(code, 0, "{f}: {err}");
        let report: ReportSchema = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
        assert_eq!(report.recording.channels, 4);
    }
}

#[test]
fn input_errors_exit_two() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(run(&["analyze", "--input", p(&dir.path().join("nope.json")), "--out", p(&out)]).0, EXIT_INPUT as i32);
    std::fs::write(dir.path().join("garbage.eegr"), b"not a stream").unwrap();
    assert_eq!(run(&["analyze", "--input", p(&dir.path().join("garbage.eegr")), "--out", p(&out)]).0, EXIT_INPUT as i32);

    let spec = write_spec(dir.path(), "s.json", json!({"duration_s": 20.0, "low_rate_hz": 128.0, "channels": ["C3", "C4"], "seed": 1}));
    run(&["synth", "--spec", &spec, "--out", p(&dir.path().join("rec"))]);
    let montage = dir.path().join("m.json");
    std::fs::write(&montage, json!({"hemispheres": ["left", "right", "midline"], "edges": [[0, 1]]}).to_string()).unwrap();
    let (code, _, err) = run(&["analyze", "--input", p(&dir.path().join("rec/recording.json")), "--montage", p(&montage), "--out", p(&out)]);
    assert_eq!(code, EXIT_INPUT as i32, "{err}");
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[calibration]\nlevel = 2.0\n").unwrap();
    let (code, _, _) = run(&["analyze", "--input", p(&dir.path().join("rec/recording.json")), "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(code, EXIT_INPUT as i32);
}

#[test]
fn montage_file_replaces_the_default() {
    let dir = tempdir().unwrap();
    let spec = write_spec(dir.path(), "s.json", json!({"duration_s": 20.0, "low_rate_hz": 128.0, "channels": ["C3", "C4"], "seed": 1}));
    run(&["synth", "--spec", &spec, "--out", p(&dir.path().join("rec"))]);
    let montage = dir.path().join("m.json");
    std::fs::write(&montage, json!({"hemispheres": ["left", "right"], "edges": [[0, 1]]}).to_string()).unwrap();
    let mut config = RunConfig::default();
    config.guardrails.band_hz = (0.5, 40.0);
    config.guardrails.frequency_band_hz = (0.5, 40.0);
    let info = cmd_analyze(&AnalyzeArgs {
        input: &dir.path().join("rec/recording.json"),
        montage: Some(&montage),
        config: &config,
        out: &dir.path().join("o"),
        timestamp: "t".into(),
    })
    .unwrap();
    assert_eq!(info.windows, 0);
}

#[test]
fn invariant_violations_map_to_exit_three() {
    use measurefirst_core::Error;
    let f = Failure::classify(Error::Implausible("bad schema".into()).into());
    assert_eq!(f.code, EXIT_INVARIANT);
    let f = Failure::classify(Error::MissingProvenance("x".into()).into());
    assert_eq!(f.code, EXIT_INVARIANT);
    let f = Failure::classify(Error::Input("x".into()).into());
    assert_eq!(f.code, EXIT_INPUT);
}
