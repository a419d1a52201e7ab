//! Synthetic recordings with exact ground truth.
//!
//! Output is a pure function of [`SynthSpec`]: every channel of every stream
//! draws from its own seeded ChaCha8 stream, events and artifacts are
//! continuous-time functions evaluated on each stream's grid, and samples
//! are rounded through `f32` so the binary container stores them losslessly.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{standard_channel_names, MontageGraph, Recording, Stream, StreamId};
use crate::dsp::rng::{self, StreamKind};
use crate::dsp::stats::{median_mad, MAD_TO_SIGMA};
use crate::dsp::FftPlan;
use crate::{Error, Result};

/// Raised-cosine ramp applied at both ends of every event.
const EVENT_RAMP_S: f64 = 0.05;
const MAX_PINK_BLOCK: usize = 1 << 16;
const EMG_COMPONENTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    #[default]
    Sine,
    /// Sharp negative spike followed by a slow wave, repeating at the event
    /// frequency. The fundamental carries most of the power.
    SpikeWave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub onset_s: f64,
    pub duration_s: f64,
    pub frequency_hz: f64,
    pub amplitude_uv: f64,
    pub channels: Vec<usize>,
    #[serde(default)]
    pub waveform: Waveform,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Total noise standard deviation in microvolts.
    pub white_sigma_uv: f64,
    /// Share of the noise variance that is 1/f shaped, in `[0, 1]`.
    pub pink_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    /// Slow, large frontal deflection (0.3-2 Hz content).
    Eog,
    /// 20-80 Hz muscle burst, temporal channels by default.
    Emg,
    /// Mains tone on every channel.
    LineNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactSpec {
    pub kind: ArtifactKind,
    pub onset_s: f64,
    pub duration_s: f64,
    pub gain_uv: f64,
    /// Mains frequency for line noise; 60 Hz when absent.
    #[serde(default)]
    pub line_hz: Option<f64>,
    /// Affected channels; a kind-specific default set when absent.
    #[serde(default)]
    pub channels: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub duration_s: f64,
    pub low_rate_hz: f64,
    #[serde(default)]
    pub high_rate_hz: Option<f64>,
    pub channels: Vec<String>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub artifacts: Vec<ArtifactSpec>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEvent {
    pub id: String,
    pub onset_s: f64,
    pub duration_s: f64,
    pub frequency_hz: f64,
    /// Peak scale of the injected waveform.
    pub amplitude_uv: f64,
    /// `1.4826 * MAD` of the clean injected waveform over the event, the
    /// quantity the amplitude guardrail estimates.
    pub robust_amplitude_uv: f64,
    pub channels: Vec<usize>,
    pub channel_names: Vec<String>,
    pub waveform: Waveform,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub duration_s: f64,
    pub events: Vec<TruthEvent>,
}

impl SynthSpec {
    /// A noise-free spec using the standard `n`-channel 10-20 names.
    pub fn new(duration_s: f64, low_rate_hz: f64, n_channels: usize, seed: u64) -> Self {
        Self {
            duration_s,
            low_rate_hz,
            high_rate_hz: None,
            channels: standard_channel_names(n_channels),
            events: Vec::new(),
            noise: NoiseSpec::default(),
            artifacts: Vec::new(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad(format!("duration_s must be positive, got {}", self.duration_s));
        }
        if !(self.low_rate_hz.is_finite() && self.low_rate_hz > 0.0) {
            return bad(format!("low_rate_hz must be positive, got {}", self.low_rate_hz));
        }
        if let Some(h) = self.high_rate_hz {
            if !(h.is_finite() && h > self.low_rate_hz) {
                return bad(format!("high_rate_hz {h} must exceed low_rate_hz {}", self.low_rate_hz));
            }
        }
        if (self.duration_s * self.low_rate_hz) < 1.0 {
            return bad("recording shorter than one low-rate sample".into());
        }
        let c = self.channels.len();
        if c == 0 || c > u16::MAX as usize {
            return bad(format!("channel count {c} out of range"));
        }
        let nyquist = self.low_rate_hz / 2.0;
        for (i, ev) in self.events.iter().enumerate() {
            if !(ev.onset_s >= 0.0 && ev.duration_s > 0.0 && ev.onset_s + ev.duration_s <= self.duration_s) {
                return bad(format!("event {i} does not lie within [0, {}] s", self.duration_s));
            }
            if !(ev.frequency_hz > 0.0 && ev.frequency_hz < nyquist) {
                return bad(format!("event {i} frequency {} Hz outside (0, {nyquist})", ev.frequency_hz));
            }
            if !(ev.amplitude_uv.is_finite() && ev.amplitude_uv >= 0.0) {
                return bad(format!("event {i} amplitude must be finite and non-negative"));
            }
            if ev.channels.is_empty() || ev.channels.iter().any(|&ch| ch >= c) {
                return bad(format!("event {i} channel list is empty or out of range"));
            }
        }
        let n = &self.noise;
        if !(n.white_sigma_uv.is_finite() && n.white_sigma_uv >= 0.0) {
            return bad("noise sigma must be finite and non-negative".into());
        }
        if !(0.0..=1.0).contains(&n.pink_fraction) {
            return bad("pink_fraction must lie in [0, 1]".into());
        }
        for (i, a) in self.artifacts.iter().enumerate() {
            if !(a.onset_s >= 0.0 && a.duration_s > 0.0 && a.onset_s + a.duration_s <= self.duration_s) {
                return bad(format!("artifact {i} does not lie within the recording"));
            }
            if !a.gain_uv.is_finite() {
                return bad(format!("artifact {i} gain must be finite"));
            }
            if let Some(chs) = &a.channels {
                if chs.iter().any(|&ch| ch >= c) {
                    return bad(format!("artifact {i} channel out of range"));
                }
            }
            if a.kind == ArtifactKind::LineNoise && a.line_hz.unwrap_or(60.0) >= nyquist {
                return bad(format!("artifact {i} line frequency at or above Nyquist"));
            }
            if a.kind == ArtifactKind::Emg && 80.0 >= nyquist {
                return bad(format!("artifact {i}: EMG needs a low rate above 160 Hz"));
            }
        }
        Ok(())
    }

    /// Samples per channel of the given stream.
    pub fn stream_len(&self, stream: StreamId) -> Option<usize> {
        let rate = match stream {
            StreamId::Low => self.low_rate_hz,
            StreamId::High => self.high_rate_hz?,
        };
        Some(libm::round(self.duration_s * rate) as usize)
    }

    fn artifact_channels(&self, a: &ArtifactSpec) -> Vec<usize> {
        if let Some(chs) = &a.channels {
            return chs.clone();
        }
        let pick = |pred: fn(&str) -> bool| -> Vec<usize> {
            let chosen: Vec<usize> = (0..self.channels.len())
                .filter(|&i| pred(&self.channels[i].to_ascii_uppercase()))
                .collect();
            if chosen.is_empty() {
                (0..self.channels.len()).collect()
            } else {
                chosen
            }
        };
        match a.kind {
            ArtifactKind::Eog => pick(|n| n.starts_with("FP") || n == "F7" || n == "F8"),
            ArtifactKind::Emg => pick(|n| matches!(n, "T3" | "T4" | "T5" | "T6" | "T7" | "T8" | "P7" | "P8")),
            ArtifactKind::LineNoise => (0..self.channels.len()).collect(),
        }
    }
}

fn spike_wave(phase: f64) -> f64 {
    let p = phase - libm::floor(phase);
    let spike = libm::exp(-0.5 * ((p - 0.1) / 0.025) * ((p - 0.1) / 0.025));
    0.75 * libm::sin(2.0 * PI * p) - 0.9 * spike
}

fn ramp(tau: f64, duration: f64) -> f64 {
    let r = EVENT_RAMP_S.min(duration / 4.0);
    let edge = tau.min(duration - tau);
    if edge >= r {
        1.0
    } else {
        0.5 * (1.0 - libm::cos(PI * edge.max(0.0) / r))
    }
}

/// Clean contribution of one event at time `t`.
pub fn event_value(ev: &EventSpec, t: f64) -> f64 {
    let tau = t - ev.onset_s;
    if tau < 0.0 || tau >= ev.duration_s {
        return 0.0;
    }
    let phase = ev.frequency_hz * tau;
    let shape = match ev.waveform {
        Waveform::Sine => libm::sin(2.0 * PI * phase),
        Waveform::SpikeWave => spike_wave(phase),
    };
    ev.amplitude_uv * ramp(tau, ev.duration_s) * shape
}

/// Sample index range `[first, end)` whose times fall inside `[t0, t1)`.
fn index_range(t0: f64, t1: f64, rate: f64, len: usize) -> (usize, usize) {
    let first = (libm::ceil(t0 * rate).max(0.0) as usize).min(len);
    let end = (libm::ceil(t1 * rate).max(0.0) as usize).min(len);
    (first, end.max(first))
}

/// Unit-variance 1/f noise by spectral shaping of white noise, generated in
/// blocks joined with a power-complementary sine/cosine crossfade.
fn pink_noise(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<f64> {
    let block = n.next_power_of_two().clamp(4, MAX_PINK_BLOCK);
    let plan = FftPlan::new(block);
    let scale: Vec<f64> = (0..block)
        .map(|k| {
            let kk = k.min(block - k);
            if kk == 0 {
                0.0
            } else {
                1.0 / libm::sqrt(kk as f64)
            }
        })
        .collect();
    let norm = 1.0 / libm::sqrt(scale.iter().map(|s| s * s).sum::<f64>() / block as f64);
    let mut make_block = || -> Vec<f64> {
        let mut buf: Vec<Complex64> = (0..block).map(|_| Complex64::new(rng::normal(rng), 0.0)).collect();
        plan.forward(&mut buf);
        for (b, s) in buf.iter_mut().zip(&scale) {
            *b *= *s;
        }
        plan.inverse(&mut buf);
        buf.iter().map(|c| c.re * norm).collect()
    };
    if n <= block {
        let mut b = make_block();
        b.truncate(n);
        return b;
    }
    let hop = block / 2;
    let window: Vec<f64> = (0..block)
        .map(|i| libm::sin(PI * (i as f64 + 0.5) / block as f64))
        .collect();
    let mut out = vec![0.0; n];
    // First block starts one hop early so every sample sees two blocks.
    let mut start: isize = -(hop as isize);
    while start < n as isize {
        let b = make_block();
        for (i, v) in b.iter().enumerate() {
            let idx = start + i as isize;
            if idx >= 0 && (idx as usize) < n {
                out[idx as usize] += window[i] * v;
            }
        }
        start += hop as isize;
    }
    out
}

/// One channel of one stream. `spec` must already be validated.
pub fn synthesize_channel(spec: &SynthSpec, channel: usize, stream: StreamId) -> Vec<f64> {
    let (rate, white_kind, pink_kind) = match stream {
        StreamId::Low => (spec.low_rate_hz, StreamKind::LowWhite, StreamKind::LowPink),
        StreamId::High => (
            spec.high_rate_hz.expect("high-rate stream requested from a low-rate spec"),
            StreamKind::HighWhite,
            StreamKind::HighPink,
        ),
    };
    let len = spec.stream_len(stream).unwrap_or(0);
    let mut x = vec![0.0; len];

    let sigma = spec.noise.white_sigma_uv;
    if sigma > 0.0 {
        let p = spec.noise.pink_fraction;
        let w_gain = sigma * libm::sqrt(1.0 - p);
        if w_gain > 0.0 {
            let mut r = rng::substream(spec.seed, white_kind, channel as u64);
            for v in x.iter_mut() {
                *v += w_gain * rng::normal(&mut r);
            }
        }
        if p > 0.0 {
            let mut r = rng::substream(spec.seed, pink_kind, channel as u64);
            let p_gain = sigma * libm::sqrt(p);
            for (v, q) in x.iter_mut().zip(pink_noise(&mut r, len)) {
                *v += p_gain * q;
            }
        }
    }

    for ev in spec.events.iter().filter(|e| e.channels.contains(&channel)) {
        let (first, end) = index_range(ev.onset_s, ev.onset_s + ev.duration_s, rate, len);
        for (i, v) in x.iter_mut().enumerate().take(end).skip(first) {
            *v += event_value(ev, i as f64 / rate);
        }
    }

    for (ai, a) in spec.artifacts.iter().enumerate() {
        if !spec.artifact_channels(a).contains(&channel) {
            continue;
        }
        let (first, end) = index_range(a.onset_s, a.onset_s + a.duration_s, rate, len);
        match a.kind {
            ArtifactKind::Eog => {
                for (i, v) in x.iter_mut().enumerate().take(end).skip(first) {
                    let tau = i as f64 / rate - a.onset_s;
                    let s = libm::sin(PI * tau / a.duration_s);
                    *v += a.gain_uv * s * s;
                }
            }
            ArtifactKind::Emg => {
                let mut r = rng::substream(spec.seed, StreamKind::Artifact, (ai as u64) << 16 | channel as u64);
                let comps: Vec<(f64, f64)> = (0..EMG_COMPONENTS)
                    .map(|_| (rng::uniform(&mut r, 20.0, 80.0), rng::uniform(&mut r, 0.0, 2.0 * PI)))
                    .collect();
                let g = a.gain_uv * libm::sqrt(2.0 / EMG_COMPONENTS as f64);
                for (i, v) in x.iter_mut().enumerate().take(end).skip(first) {
                    let tau = i as f64 / rate - a.onset_s;
                    let s: f64 = comps.iter().map(|&(f, ph)| libm::sin(2.0 * PI * f * tau + ph)).sum();
                    *v += g * ramp(tau, a.duration_s) * s;
                }
            }
            ArtifactKind::LineNoise => {
                let f = a.line_hz.unwrap_or(60.0);
                for (i, v) in x.iter_mut().enumerate().take(end).skip(first) {
                    *v += a.gain_uv * libm::sin(2.0 * PI * f * i as f64 / rate);
                }
            }
        }
    }

    for v in x.iter_mut() {
        *v = *v as f32 as f64;
    }
    x
}

/// Ground truth for every injected event, in spec order.
pub fn ground_truth(spec: &SynthSpec) -> GroundTruth {
    let rate = spec.low_rate_hz;
    let events = spec
        .events
        .iter()
        .enumerate()
        .map(|(i, ev)| {
            let (first, end) = index_range(ev.onset_s, ev.onset_s + ev.duration_s, rate, usize::MAX);
            let clean: Vec<f64> = (first..end).map(|k| event_value(ev, k as f64 / rate)).collect();
            let robust = median_mad(&clean).map_or(0.0, |(_, mad)| MAD_TO_SIGMA * mad);
            TruthEvent {
                id: format!("gt-{}", i + 1),
                onset_s: ev.onset_s,
                duration_s: ev.duration_s,
                frequency_hz: ev.frequency_hz,
                amplitude_uv: ev.amplitude_uv,
                robust_amplitude_uv: robust,
                channels: ev.channels.clone(),
                channel_names: ev.channels.iter().map(|&c| spec.channels[c].clone()).collect(),
                waveform: ev.waveform,
            }
        })
        .collect();
    GroundTruth {
        duration_s: spec.duration_s,
        events,
    }
}

/// Builds the full recording and its ground truth.
pub fn synthesize(spec: &SynthSpec) -> Result<(Recording, GroundTruth)> {
    spec.validate()?;
    let n = spec.channels.len();
    let low = Stream::new(
        spec.low_rate_hz,
        (0..n).map(|c| synthesize_channel(spec, c, StreamId::Low)).collect(),
    )?;
    let high = match spec.high_rate_hz {
        Some(rate) => Some(Stream::new(
            rate,
            (0..n).map(|c| synthesize_channel(spec, c, StreamId::High)).collect(),
        )?),
        None => None,
    };
    let montage = MontageGraph::from_channel_names(&spec.channels);
    let rec = Recording::new(spec.channels.clone(), low, high, 0.0, montage)?
        .with_note(format!("synthesized: seed {}", spec.seed));
    Ok((rec, ground_truth(spec)))
}
