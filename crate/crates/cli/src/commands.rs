//! Subcommand implementations. Each returns what it wrote so tests can
//! drive them without a process boundary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use measurefirst_core::neural::Backbone;
use measurefirst_core::pipeline::{analyze, Analysis, CalibrationSummary};
use measurefirst_core::report::ReportSchema;
use measurefirst_core::signal::synth::{synthesize, GroundTruth, SynthSpec};
use measurefirst_core::signal::{standard_channel_names, MontageGraph, Recording};
use serde::Serialize;

use crate::config::RunConfig;
use crate::metrics::{eval_values, DetectionMetrics, DetectionTally, ValueErrors};
use crate::{csvio, edf, eegr, weights, Failure};

pub const RECORDING_STEM: &str = "recording";
pub const TRUTH_FILE: &str = "ground_truth.json";

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_spec(path: &Path) -> Result<SynthSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec: SynthSpec = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
        _ => serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
    };
    spec.validate()?;
    Ok(spec)
}

/// Writes `recording.json`, its stream files and `ground_truth.json`.
pub fn cmd_synth(spec: &SynthSpec, out: &Path) -> Result<PathBuf> {
    let (rec, truth) = synthesize(spec)?;
    let sidecar = eegr::write_recording(out, RECORDING_STEM, &rec)?;
    write_json(&out.join(TRUTH_FILE), &truth)?;
    Ok(sidecar)
}

/// Loads a sidecar (`.json`), a bare stream (`.eegr`), CSV or EDF.
pub fn load_recording(path: &Path) -> Result<Recording> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("csv") => csvio::read_csv(path),
        Some("edf") => edf::read_edf(path),
        Some("eegr") => {
            let s = eegr::read_stream(path)?;
            let names = standard_channel_names(s.n_channels());
            let montage = MontageGraph::from_channel_names(&names);
            Ok(Recording::new(names, s, None, 0.0, montage)?)
        }
        _ => eegr::read_recording(path),
    }
}

#[derive(Debug, Serialize)]
pub struct RunInfo {
    pub timestamp: String,
    pub algorithm_version: &'static str,
    pub seed: u64,
    pub input: String,
    pub latency_s: f64,
    pub windows: usize,
    pub mask_events: usize,
    pub calibration: Option<CalibrationSummary>,
}

pub struct AnalyzeArgs<'a> {
    pub input: &'a Path,
    pub montage: Option<&'a Path>,
    pub config: &'a RunConfig,
    pub out: &'a Path,
    pub timestamp: String,
}

pub fn run_analysis(rec: &Recording, cfg: &RunConfig, timestamp: &str) -> Result<Analysis> {
    let templates = cfg.template_set()?;
    let pipeline = cfg.pipeline();
    let loaded = match (&cfg.neural.weights, cfg.neural.enabled) {
        (Some(p), true) => Some(Backbone::from_store(&pipeline.neural.backbone, &weights::read_weights(p)?)?),
        _ => None,
    };
    Ok(analyze(rec, &pipeline, &templates, loaded.as_ref(), timestamp)?)
}

/// Full pipeline on one input. Writes `report.json`, `narrative.txt`,
/// `provenance.json`, `run.json` and, when the forecaster ran,
/// `calibration.json`.
pub fn cmd_analyze(args: &AnalyzeArgs) -> std::result::Result<RunInfo, Failure> {
    let started = Instant::now();
    let mut rec = load_recording(args.input).map_err(Failure::input)?;
    if let Some(m) = args.montage {
        let montage: MontageGraph = read_json(m).map_err(Failure::input)?;
        rec = rec.with_montage(montage).map_err(|e| Failure::input(e.into()))?;
    }
    let analysis = run_analysis(&rec, args.config, &args.timestamp).map_err(Failure::classify)?;
    let write = || -> Result<()> {
        std::fs::create_dir_all(args.out)?;
        write_json(&args.out.join("report.json"), &analysis.report)?;
        std::fs::write(args.out.join("narrative.txt"), format!("{}\n", analysis.report.narrative))?;
        write_json(&args.out.join("provenance.json"), &analysis.report.provenance_log)?;
        if let Some((_, state)) = &analysis.calibration {
            write_json(&args.out.join("calibration.json"), state)?;
        }
        Ok(())
    };
    write().map_err(Failure::input)?;
    let info = RunInfo {
        timestamp: args.timestamp.clone(),
        algorithm_version: measurefirst_core::ALGORITHM_VERSION,
        seed: args.config.seed,
        input: args.input.display().to_string(),
        latency_s: started.elapsed().as_secs_f64(),
        windows: analysis.windows.len(),
        mask_events: analysis.mask_events.len(),
        calibration: analysis.calibration.as_ref().map(|(s, _)| s.clone()),
    };
    write_json(&args.out.join("run.json"), &info).map_err(Failure::input)?;
    Ok(info)
}

/// Every directory at or below `data` holding a synthesized recording and
/// its ground truth, sorted by path.
pub fn bench_cases(data: &Path) -> Result<Vec<PathBuf>> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        if dir.join(format!("{RECORDING_STEM}.json")).is_file() && dir.join(TRUTH_FILE).is_file() {
            out.push(dir.to_path_buf());
        }
        let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)
            .with_context(|| format!("listing {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        subdirs.sort();
        for d in subdirs {
            walk(&d, out)?;
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(data, &mut out)?;
    if out.is_empty() {
        bail!("no {RECORDING_STEM}.json + {TRUTH_FILE} pairs under {}", data.display());
    }
    Ok(out)
}

pub fn cmd_bench(data: &Path, cfg: &RunConfig, out: &Path) -> std::result::Result<DetectionMetrics, Failure> {
    let cases = bench_cases(data).map_err(Failure::input)?;
    let mut tally = DetectionTally::default();
    for dir in cases {
        let rec = eegr::read_recording(&dir.join(format!("{RECORDING_STEM}.json"))).map_err(Failure::input)?;
        let truth: GroundTruth = read_json(&dir.join(TRUTH_FILE)).map_err(Failure::input)?;
        let a = run_analysis(&rec, cfg, "bench").map_err(Failure::classify)?;
        let t: Vec<f64> = truth.events.iter().map(|e| e.onset_s).collect();
        let p: Vec<f64> = a.report.findings.iter().map(|f| f.onset_s.value).collect();
        let name = dir.strip_prefix(data).unwrap_or(&dir).display().to_string();
        tally.add(&name, &t, &p, rec.duration_s());
    }
    let metrics = tally.finish();
    write_json(out, &metrics).map_err(Failure::input)?;
    Ok(metrics)
}

pub fn cmd_eval_values(pred: &Path, truth: &Path, cfg: &RunConfig) -> Result<ValueErrors> {
    let report: ReportSchema = read_json(pred)?;
    let truth: GroundTruth = read_json(truth)?;
    Ok(eval_values(&report, &truth, &cfg.tolerances))
}

pub fn format_value_table(v: &ValueErrors) -> String {
    let cell = |x: Option<f64>| x.map_or("n/a".to_string(), |x| format!("{x:.3}"));
    let mut s = format!(
        "matched {}  unmatched predictions {}  unmatched truths {}  abstained {}\n",
        v.matched, v.unmatched_predictions, v.unmatched_truths, v.abstained
    );
    s += &format!("{:<14}{:>10}\n", "quantity", "MAE");
    s += &format!("{:<14}{:>10}\n", "frequency Hz", cell(v.frequency_mae_hz));
    s += &format!("{:<14}{:>10}\n", "duration s", cell(v.duration_mae_s));
    s += &format!("{:<14}{:>10}\n", "amplitude µV", cell(v.amplitude_mae_uv));
    for f in &v.flags {
        s += &format!(
            "over tolerance: {} vs {} {} error {:.3} > {}\n",
            f.event_id, f.truth_id, f.kind, f.error, f.tolerance
        );
    }
    s
}
