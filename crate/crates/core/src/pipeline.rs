//! End-to-end analysis of one recording: preprocess, gate, measure,
//! calibrate, report.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationConfig, QuantileCalibrator};
use crate::gating::{crop_stream, detect_candidates, Crop, EventWindow, GatingConfig};
use crate::guardrails::{
    check_plausibility, dominant_frequency, estimate_duration, event_amplitude, event_duration, envelope_baseline,
    lateralization, welch_psd, FrozenMeasurement, HysteresisConfig, MeasurementKind, Outcome, Plausibility,
    PlausibilityLimits, Provenance, Psd, WelchConfig,
};
use crate::neural::{pinball_loss, Backbone, BackboneConfig, DetectionHead};
use crate::report::{
    build_schema, generate_default_narrative, validate_schema, FindingInput, MaskEvent, ProvenanceEntry,
    RecordingMeta, ReportSchema, TemplateSet,
};
use crate::signal::{preprocess, ClinicalTolerances, Recording, Stream, StreamId};
use crate::{Error, Result};

pub const METHOD_FREQUENCY: &str = "welch_dominant_frequency";
pub const METHOD_DURATION: &str = "hysteresis_duration";
pub const METHOD_CORE_SPAN: &str = "gate_core_span";
pub const METHOD_AMPLITUDE: &str = "robust_amplitude";
pub const METHOD_LATERALIZATION: &str = "hemispheric_lateralization";

/// Confidence given to a duration that fell back to the gate's core span.
const CORE_SPAN_CONFIDENCE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuardrailConfig {
    /// `false` in config files turns the notch off.
    #[serde(with = "notch_repr")]
    pub notch_hz: Option<f64>,
    pub band_hz: (f64, f64),
    pub frequency_band_hz: (f64, f64),
    pub welch: WelchConfig,
    pub hysteresis: HysteresisConfig,
    pub plausibility: PlausibilityLimits,
    pub lateralization_band_hz: (f64, f64),
    pub keep_fraction: f64,
    /// Seconds added on each side for a re-measurement.
    pub widen_s: f64,
}

mod notch_repr {
    use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Off(bool),
        Hz(f64),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(hz) => Repr::Hz(*hz),
            None => Repr::Off(false),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Hz(hz) => Ok(Some(hz)),
            Repr::Off(false) => Ok(None),
            Repr::Off(true) => Err(de::Error::custom("notch_hz takes a frequency or false")),
        }
    }
}

impl Default for GuardrailConfig {
    fn default() -> Self {
        Self {
            notch_hz: Some(60.0),
            band_hz: (0.5, 80.0),
            frequency_band_hz: (0.5, 80.0),
            welch: WelchConfig::default(),
            hysteresis: HysteresisConfig::default(),
            plausibility: PlausibilityLimits::default(),
            lateralization_band_hz: (1.0, 45.0),
            keep_fraction: 1.0,
            widen_s: 2.0,
        }
    }
}

impl GuardrailConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(f) = self.notch_hz {
            if !(f > 0.0) {
                return Err(Error::Config("notch_hz must be positive".into()));
            }
        }
        for (name, (lo, hi)) in [
            ("band_hz", self.band_hz),
            ("frequency_band_hz", self.frequency_band_hz),
            ("lateralization_band_hz", self.lateralization_band_hz),
        ] {
            if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
                return Err(Error::Config(format!("{name} must satisfy 0 <= lo < hi")));
            }
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return Err(Error::Config("keep_fraction must lie in (0, 1]".into()));
        }
        if !(self.widen_s >= 0.0) {
            return Err(Error::Config("widen_s must be non-negative".into()));
        }
        self.welch.validate()?;
        self.hysteresis.validate()
    }

    fn limits(&self) -> PlausibilityLimits {
        PlausibilityLimits {
            analysis_band_hz: Some(self.frequency_band_hz),
            ..self.plausibility
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralConfig {
    /// Run the quantile forecaster and its online calibration.
    pub enabled: bool,
    pub backbone: BackboneConfig,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            backbone: BackboneConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub gating: GatingConfig,
    pub guardrails: GuardrailConfig,
    pub calibration: CalibrationConfig,
    pub tolerances: ClinicalTolerances,
    pub neural: NeuralConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            gating: GatingConfig::default(),
            guardrails: GuardrailConfig::default(),
            calibration: CalibrationConfig::default(),
            tolerances: ClinicalTolerances::default(),
            neural: NeuralConfig::default(),
            seed: 42,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.gating.validate()?;
        self.guardrails.validate()?;
        self.calibration.validate()?;
        self.tolerances.validate()?;
        self.neural.backbone.validate()
    }
}

/// Everything measured for one gated window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowMeasurements {
    pub window: EventWindow,
    pub onset: FrozenMeasurement,
    pub duration: FrozenMeasurement,
    pub frequency: Outcome,
    pub amplitude: Outcome,
    pub lateralization: Outcome,
    /// Re-measurements triggered by plausibility violations.
    pub remeasured: u32,
}

/// Whole-channel envelope baselines, filled on first use.
#[derive(Debug, Clone, Default)]
pub struct BaselineCache {
    entries: Vec<Option<(f64, f64)>>,
    filled: Vec<bool>,
}

impl BaselineCache {
    fn get(&mut self, stream: &Stream, c: usize, cfg: &HysteresisConfig) -> Option<(f64, f64)> {
        if self.entries.len() < stream.n_channels() {
            self.entries.resize(stream.n_channels(), None);
            self.filled.resize(stream.n_channels(), false);
        }
        if !self.filled[c] {
            self.entries[c] = envelope_baseline(stream.channel(c), stream.rate_hz(), cfg);
            self.filled[c] = true;
        }
        self.entries[c]
    }
}

fn measurement_stream(rec: &Recording) -> (&Stream, StreamId) {
    match rec.high() {
        Some(h) => (h, StreamId::High),
        None => (rec.low(), StreamId::Low),
    }
}

fn crop_provenance(method: &str, crop: &Crop, channels: Vec<usize>) -> Provenance {
    let t0 = crop.start_s();
    Provenance::new(method, (t0, t0 + crop.len() as f64 / crop.rate_hz), channels)
        .with("stream", crop.stream.as_str())
        .with("start_index", crop.start_index)
        .with("n_samples", crop.len())
}

fn sub_crop(crop: &Crop, a: usize, b: usize) -> Crop {
    Crop {
        stream: crop.stream,
        rate_hz: crop.rate_hz,
        start_index: crop.start_index + a,
        data: crop.data.iter().map(|c| c[a..b].to_vec()).collect(),
        low_rate_fallback: crop.low_rate_fallback,
    }
}

fn frequency_on(crop: &Crop, channels: &[usize], cfg: &GuardrailConfig) -> Outcome {
    let psds: Result<Vec<Psd>> = channels
        .iter()
        .map(|&c| welch_psd(&crop.data[c], crop.rate_hz, &cfg.welch))
        .collect();
    let psd = match psds.map(|p| Psd::average(&p)) {
        Ok(Some(p)) => p,
        Ok(None) => return Outcome::abstain(MeasurementKind::FrequencyHz, "no channels to average"),
        Err(e) => return Outcome::abstain(MeasurementKind::FrequencyHz, format!("{e}")),
    };
    let prov = crop_provenance(METHOD_FREQUENCY, crop, channels.to_vec())
        .with("zero_pad_factor", cfg.welch.zero_pad_factor)
        .with("segments_requested", cfg.welch.segments);
    dominant_frequency(&psd, cfg.frequency_band_hz, prov)
}

struct Segmentation {
    onset: FrozenMeasurement,
    duration: FrozenMeasurement,
    /// Sample range of the event inside the crop.
    span: (usize, usize),
}

fn segmentation_on(crop: &Crop, peak: usize, baseline: Option<(f64, f64)>, cfg: &GuardrailConfig) -> Option<Segmentation> {
    let prov = crop_provenance(METHOD_DURATION, crop, vec![peak]);
    let outcome = event_duration(&crop.data[peak], crop.rate_hz, &cfg.hysteresis, baseline, prov);
    let duration = outcome.into_frozen()?;
    let onset_in = duration.provenance.param_f64("onset_in_window_s").ok()?;
    let onset = FrozenMeasurement::new(
        MeasurementKind::OnsetS,
        crop.start_s() + onset_in,
        duration.confidence,
        None,
        duration.provenance.clone(),
    );
    let a = libm::round(onset_in * crop.rate_hz) as usize;
    let b = libm::round((onset_in + duration.value) * crop.rate_hz) as usize;
    let span = (a.min(crop.len()), b.min(crop.len()));
    Some(Segmentation { onset, duration, span })
}

fn core_span(w: &EventWindow, crop: &Crop, cfg: &GatingConfig) -> Segmentation {
    let prov = Provenance::new(METHOD_CORE_SPAN, (w.core_start_s, w.core_end_s), w.consensus_channels.clone())
        .with("hop_s", cfg.hop_s)
        .with("feature_window_s", cfg.feature_window_s);
    let dur = FrozenMeasurement::new(
        MeasurementKind::DurationS,
        w.core_end_s - w.core_start_s,
        CORE_SPAN_CONFIDENCE,
        None,
        prov.clone(),
    );
    let onset = FrozenMeasurement::new(MeasurementKind::OnsetS, w.core_start_s, CORE_SPAN_CONFIDENCE, None, prov);
    let t0 = crop.start_s();
    let a = libm::round((w.core_start_s - t0).max(0.0) * crop.rate_hz) as usize;
    let b = libm::round((w.core_end_s - t0).max(0.0) * crop.rate_hz) as usize;
    Segmentation {
        onset,
        duration: dur,
        span: (a.min(crop.len()), b.min(crop.len())),
    }
}

fn violated(o: &Outcome, limits: &PlausibilityLimits) -> bool {
    match o.frozen() {
        Some(m) => check_plausibility(m, 0, limits) != Plausibility::Pass,
        None => true,
    }
}

/// Second attempt after a violation: pass, or abstain with the reason.
fn settle(o: Outcome, limits: &PlausibilityLimits) -> Outcome {
    match o {
        Outcome::Frozen(m) => match check_plausibility(&m, 1, limits) {
            Plausibility::Pass => Outcome::Frozen(m),
            Plausibility::ReMeasure(r) | Plausibility::Abstain(r) => Outcome::abstain(m.kind, r),
        },
        a => a,
    }
}

struct Attempt {
    crop: Crop,
    peak: usize,
    seg: Option<Segmentation>,
}

fn attempt(rec: &Recording, w: &EventWindow, t0: f64, t1: f64, cfg: &GuardrailConfig, cache: &mut BaselineCache) -> Result<Attempt> {
    let (stream, id) = measurement_stream(rec);
    let crop = crop_stream(stream, id, t0, t1, rec.high().is_none())?;
    if crop.is_empty() {
        return Err(Error::Input(format!("window [{t0}, {t1}] is empty")));
    }
    let energy = |c: usize| crop.data[c].iter().map(|v| v * v).sum::<f64>();
    let peak = *w
        .consensus_channels
        .iter()
        .max_by(|&&a, &&b| energy(a).total_cmp(&energy(b)))
        .ok_or_else(|| Error::Input("window has no consensus channels".into()))?;
    let baseline = cache.get(stream, peak, &cfg.hysteresis);
    let seg = segmentation_on(&crop, peak, baseline, cfg);
    Ok(Attempt { crop, peak, seg })
}

/// Measures one window with the re-measure/abstain policy.
pub fn measure_window(
    rec: &Recording,
    w: &EventWindow,
    gating: &GatingConfig,
    cfg: &GuardrailConfig,
    cache: &mut BaselineCache,
) -> Result<WindowMeasurements> {
    let limits = cfg.limits();
    let seg_ok = |s: &Option<Segmentation>| match s {
        Some(s) => [&s.duration, &s.onset]
            .iter()
            .all(|m| check_plausibility(m, 0, &limits) == Plausibility::Pass),
        None => false,
    };
    let mut first = attempt(rec, w, w.t_start_s, w.t_end_s, cfg, cache)?;
    if seg_ok(&first.seg) {
        let seg = first.seg.take().unwrap();
        return finish(first, seg, None, rec, w, cfg, &limits, 0, cache);
    }
    let t0 = (w.t_start_s - cfg.widen_s).max(0.0);
    let t1 = (w.t_end_s + cfg.widen_s).min(rec.duration_s());
    let mut wide = attempt(rec, w, t0, t1, cfg, cache)?;
    if seg_ok(&wide.seg) {
        let seg = wide.seg.take().unwrap();
        return finish(wide, seg, None, rec, w, cfg, &limits, 1, cache);
    }
    let fallback = core_span(w, &first.crop, gating);
    finish(first, fallback, Some(wide), rec, w, cfg, &limits, 1, cache)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    base: Attempt,
    seg: Segmentation,
    mut wide: Option<Attempt>,
    rec: &Recording,
    w: &EventWindow,
    cfg: &GuardrailConfig,
    limits: &PlausibilityLimits,
    mut remeasured: u32,
    cache: &mut BaselineCache,
) -> Result<WindowMeasurements> {
    let t0 = (w.t_start_s - cfg.widen_s).max(0.0);
    let t1 = (w.t_end_s + cfg.widen_s).min(rec.duration_s());
    let mut widened = |cache: &mut BaselineCache| -> Result<Crop> {
        if wide.is_none() {
            wide = Some(attempt(rec, w, t0, t1, cfg, cache)?);
        }
        Ok(wide.as_ref().unwrap().crop.clone())
    };

    let mut frequency = frequency_on(&base.crop, &w.consensus_channels, cfg);
    if violated(&frequency, limits) {
        remeasured += 1;
        frequency = settle(frequency_on(&widened(cache)?, &w.consensus_channels, cfg), limits);
    }

    let (a, b) = seg.span;
    let amp_on = |crop: &Crop, a: usize, b: usize| -> Outcome {
        let sub = sub_crop(crop, a, b.max(a));
        let prov = crop_provenance(METHOD_AMPLITUDE, &sub, vec![base.peak]);
        event_amplitude(&sub.data[base.peak], prov)
    };
    let mut amplitude = amp_on(&base.crop, a, b);
    if violated(&amplitude, limits) {
        remeasured += 1;
        let wc = widened(cache)?;
        let n = wc.len();
        amplitude = settle(amp_on(&wc, 0, n), limits);
    }

    let lat_on = |crop: &Crop| -> Outcome {
        let all: Vec<usize> = (0..crop.data.len()).collect();
        let prov = crop_provenance(METHOD_LATERALIZATION, crop, all);
        lateralization(
            &crop.data,
            crop.rate_hz,
            cfg.lateralization_band_hz,
            cfg.keep_fraction,
            rec.montage(),
            prov,
        )
    };
    let span_crop = sub_crop(&base.crop, a, b.max(a));
    let mut lat = lat_on(&span_crop);
    if violated(&lat, limits) {
        remeasured += 1;
        lat = settle(lat_on(&widened(cache)?), limits);
    }

    Ok(WindowMeasurements {
        window: w.clone(),
        onset: seg.onset,
        duration: seg.duration,
        frequency,
        amplitude,
        lateralization: lat,
        remeasured,
    })
}

/// Detection confidence from the gating trigger features.
pub fn detection_confidence(w: &EventWindow) -> f64 {
    let t = &w.trigger;
    DetectionHead::trigger_default()
        .score_features(&[t.energy_z, t.kurtosis, t.spectral_peak_prominence])
        .unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub windows_forecast: usize,
    pub calibrated: bool,
    pub change_points: usize,
    pub mean_pinball_loss: Option<f64>,
    /// Fraction of targets at or below the adjusted upper quantile.
    pub upper_coverage: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: ReportSchema,
    pub mask_events: Vec<MaskEvent>,
    pub windows: Vec<EventWindow>,
    pub preprocessed: Recording,
    pub calibration: Option<(CalibrationSummary, QuantileCalibrator)>,
}

fn channel_mean(stream: &Stream, a: usize, b: usize) -> Vec<f64> {
    let c = stream.n_channels() as f64;
    (a..b)
        .map(|i| stream.channels().iter().map(|ch| ch[i]).sum::<f64>() / c)
        .collect()
}

/// Forecast after each window and calibrate online against what followed.
fn calibrate(
    rec: &Recording,
    windows: &[EventWindow],
    net: &Backbone,
    cfg: &PipelineConfig,
    timestamp: &str,
) -> Result<(CalibrationSummary, QuantileCalibrator)> {
    let nc = &net.config();
    let levels = crate::neural::QuantileForecast::default_levels(nc.quantile_levels);
    let mut cal = QuantileCalibrator::new(&levels, &cfg.calibration)?;
    let low = rec.low();
    let bias = rec.montage().bias_matrix(nc.bias_kind);
    let (mut n, mut loss, mut covered, mut total) = (0usize, 0.0, 0usize, 0usize);
    for w in windows {
        let a = libm::round(w.t_start_s * low.rate_hz()) as usize;
        let b = (libm::round(w.t_end_s * low.rate_hz()) as usize).min(low.len());
        if b + nc.horizon > low.len() || b <= a {
            continue;
        }
        let input: Vec<Vec<f64>> = low.channels().iter().map(|c| c[a..b].to_vec()).collect();
        let out = net.forward(&input, low.rate_hz(), &bias)?;
        let y = channel_mean(low, b, b + nc.horizon);
        let adjusted = cal.adjust(&out.quantiles)?;
        let top = adjusted.levels.len() - 1;
        for (yh, row) in y.iter().zip(&adjusted.values) {
            covered += usize::from(*yh <= row[top]);
            total += 1;
        }
        loss += pinball_loss(&y, &adjusted)?;
        n += 1;
        cal.observe(&y, &out.quantiles)?;
        cal.recalibrate_triggered(timestamp);
    }
    let summary = CalibrationSummary {
        windows_forecast: n,
        calibrated: cal.is_calibrated(),
        change_points: cal.change_points(),
        mean_pinball_loss: (n > 0).then(|| loss / n as f64),
        upper_coverage: (total > 0).then(|| covered as f64 / total as f64),
    };
    Ok((summary, cal))
}

/// Runs every stage on a raw recording. `weights` overrides the seeded
/// backbone; `timestamp` only reaches the calibration log.
pub fn analyze(
    raw: &Recording,
    cfg: &PipelineConfig,
    templates: &TemplateSet,
    weights: Option<&Backbone>,
    timestamp: &str,
) -> Result<Analysis> {
    cfg.validate()?;
    templates.validate()?;
    let g = &cfg.guardrails;
    let rec = preprocess(raw, g.notch_hz, g.band_hz)?;
    let windows = detect_candidates(&rec, &cfg.gating)?;

    let mut cache = BaselineCache::default();
    let mut inputs = Vec::with_capacity(windows.len());
    for w in &windows {
        let m = measure_window(&rec, w, &cfg.gating, g, &mut cache)?;
        inputs.push(FindingInput {
            onset: m.onset,
            duration: m.duration,
            frequency: m.frequency,
            amplitude: m.amplitude,
            lateralization: m.lateralization,
            detection_confidence: detection_confidence(w),
        });
    }

    let calibration = if cfg.neural.enabled && !windows.is_empty() {
        let seeded;
        let net = match weights {
            Some(n) => n,
            None => {
                seeded = Backbone::random(&cfg.neural.backbone, cfg.seed)?;
                &seeded
            }
        };
        Some(calibrate(&rec, &windows, net, cfg, timestamp)?)
    } else {
        None
    };

    let meta = RecordingMeta {
        duration_s: rec.duration_s(),
        channels: rec.n_channels(),
        low_rate_hz: rec.low().rate_hz(),
        high_rate_hz: rec.high().map(Stream::rate_hz),
    };
    let mut report = build_schema(meta, inputs)?;
    let decoded = generate_default_narrative(&report, templates)?;
    report.narrative = decoded.text;
    validate_schema(&report)?;
    Ok(Analysis {
        report,
        mask_events: decoded.mask_events,
        windows,
        preprocessed: rec,
        calibration,
    })
}

fn crop_from(rec: &Recording, p: &Provenance) -> Result<Crop> {
    let id = match p.param("stream") {
        Some("high") => StreamId::High,
        Some("low") => StreamId::Low,
        other => return Err(Error::MissingProvenance(format!("unknown stream {other:?}"))),
    };
    let stream = rec
        .stream(id)
        .ok_or_else(|| Error::MissingProvenance(format!("recording has no {} stream", id.as_str())))?;
    let start = p.param_usize("start_index")?;
    let n = p.param_usize("n_samples")?;
    if start + n > stream.len() {
        return Err(Error::MissingProvenance("provenance window exceeds the stream".into()));
    }
    Ok(Crop {
        stream: id,
        rate_hz: stream.rate_hz(),
        start_index: start,
        data: stream.channels().iter().map(|c| c[start..start + n].to_vec()).collect(),
        low_rate_fallback: false,
    })
}

fn channel(p: &Provenance, n: usize) -> Result<usize> {
    match p.channels.as_slice() {
        [c] if *c < n => Ok(*c),
        _ => Err(Error::MissingProvenance("expected exactly one valid channel".into())),
    }
}

/// Recomputes the measurements an entry describes from the preprocessed
/// recording, returning `(kind, canonical text)` pairs.
pub fn reexecute(rec: &Recording, entry: &ProvenanceEntry) -> Result<Vec<(MeasurementKind, String)>> {
    let p = entry.provenance();
    p.validate()?;
    let text = |o: Outcome| -> Result<String> {
        o.into_frozen()
            .map(|m| m.canonical_text)
            .ok_or_else(|| Error::MissingProvenance(format!("{} abstained on re-execution", entry.id)))
    };
    match p.method.as_str() {
        METHOD_FREQUENCY => {
            let crop = crop_from(rec, &p)?;
            let welch = WelchConfig {
                segments: p.param_usize("segments_requested")?,
                overlap: p.param_f64("overlap")?,
                zero_pad_factor: p.param_usize("zero_pad_factor")?,
            };
            let band = (p.param_f64("band_lo_hz")?, p.param_f64("band_hi_hz")?);
            let psds = p
                .channels
                .iter()
                .map(|&c| {
                    let x = crop.data.get(c).ok_or_else(|| Error::MissingProvenance("channel out of range".into()))?;
                    welch_psd(x, crop.rate_hz, &welch)
                })
                .collect::<Result<Vec<_>>>()?;
            let psd = Psd::average(&psds).ok_or_else(|| Error::MissingProvenance("no channels".into()))?;
            let fresh = Provenance::new(METHOD_FREQUENCY, p.window, p.channels.clone());
            Ok(vec![(MeasurementKind::FrequencyHz, text(dominant_frequency(&psd, band, fresh))?)])
        }
        METHOD_DURATION => {
            let crop = crop_from(rec, &p)?;
            let c = channel(&p, crop.data.len())?;
            let hc = HysteresisConfig {
                envelope_s: p.param_f64("envelope_s")?,
                high_k: p.param_f64("high_k")?,
                low_k: p.param_f64("low_k")?,
                merge_gap_s: p.param_f64("merge_gap_s")?,
            };
            let baseline = match (p.param_f64("baseline_median"), p.param_f64("baseline_sigma")) {
                (Ok(m), Ok(s)) => Some((m, s)),
                _ => None,
            };
            let d = estimate_duration(&crop.data[c], crop.rate_hz, &hc, baseline).map_err(Error::MissingProvenance)?;
            let onset = crop.start_s() + d.onset_s;
            Ok(vec![
                (MeasurementKind::DurationS, crate::guardrails::canonical_text(MeasurementKind::DurationS, d.duration_s)),
                (MeasurementKind::OnsetS, crate::guardrails::canonical_text(MeasurementKind::OnsetS, onset)),
            ])
        }
        METHOD_CORE_SPAN => Ok(vec![
            (
                MeasurementKind::DurationS,
                crate::guardrails::canonical_text(MeasurementKind::DurationS, p.window.1 - p.window.0),
            ),
            (MeasurementKind::OnsetS, crate::guardrails::canonical_text(MeasurementKind::OnsetS, p.window.0)),
        ]),
        METHOD_AMPLITUDE => {
            let crop = crop_from(rec, &p)?;
            let c = channel(&p, crop.data.len())?;
            let fresh = Provenance::new(METHOD_AMPLITUDE, p.window, p.channels.clone());
            Ok(vec![(MeasurementKind::AmplitudeUv, text(event_amplitude(&crop.data[c], fresh))?)])
        }
        METHOD_LATERALIZATION => {
            let crop = crop_from(rec, &p)?;
            let band = (p.param_f64("band_lo_hz")?, p.param_f64("band_hi_hz")?);
            let keep = p.param_f64("keep_fraction")?;
            let fresh = Provenance::new(METHOD_LATERALIZATION, p.window, p.channels.clone());
            let o = lateralization(&crop.data, crop.rate_hz, band, keep, rec.montage(), fresh);
            Ok(vec![(MeasurementKind::LateralizationIndex, text(o)?)])
        }
        other => Err(Error::MissingProvenance(format!("unknown method {other}"))),
    }
}

/// Re-executes every provenance entry of `report` and compares with the
/// recorded canonical texts. Returns the ids that disagree.
pub fn verify_provenance(rec: &Recording, report: &ReportSchema) -> Result<Vec<String>> {
    let mut bad = Vec::new();
    for e in &report.provenance_log {
        let got = reexecute(rec, e)?;
        let mut ok = got.iter().any(|(k, t)| *k == e.kind && *t == e.text);
        if e.kind == MeasurementKind::DurationS {
            for f in report.findings.iter().filter(|f| f.duration_s.provenance_id == e.id) {
                ok &= got
                    .iter()
                    .any(|(k, t)| *k == MeasurementKind::OnsetS && *t == f.onset_s.text);
            }
        }
        if !ok {
            bad.push(e.id.clone());
        }
    }
    Ok(bad)
}

/// Human summary line used by the command-line driver.
pub fn summary_line(a: &Analysis) -> String {
    format!(
        "{} finding(s), impression {:?}, {} mask event(s)",
        a.report.findings.len(),
        a.report.overall_impression,
        a.mask_events.len()
    )
}
