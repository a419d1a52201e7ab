//! Event gating on the low-rate stream and high-rate crop extraction.
//!
//! Every channel is scanned with 1 s feature frames at a 0.25 s hop. A
//! channel votes for a frame when its RMS z-score, excess kurtosis or
//! spectral peak prominence crosses a threshold; a frame is active when at
//! least `k` channels vote. Runs of active frames become windows, which are
//! padded to the minimum length, given margins and merged.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::spectrum::Periodogram;
use crate::dsp::stats::{median_in_place, median_mad, MAD_TO_SIGMA};
use crate::signal::{Recording, StreamId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatingConfig {
    pub min_window_s: f64,
    pub max_window_s: f64,
    pub margin_s: f64,
    pub energy_z_threshold: f64,
    pub kurtosis_threshold: f64,
    /// Spectral peak prominence over the per-bin median spectrum, dB.
    pub peak_prominence_db: f64,
    /// `None` means `max(2, ceil(C / 8))`, clamped to the channel count.
    pub consensus_k: Option<usize>,
    pub merge_gap_s: f64,
    pub feature_window_s: f64,
    pub hop_s: f64,
    /// Span of the short Welch estimate behind the prominence feature.
    pub spectral_span_s: f64,
    pub spectral_band_hz: (f64, f64),
}

impl Default for GatingConfig {
    fn default() -> Self {
        Self {
            min_window_s: 2.0,
            max_window_s: 10.0,
            margin_s: 2.0,
            energy_z_threshold: 4.0,
            kurtosis_threshold: 5.0,
            peak_prominence_db: 6.0,
            consensus_k: None,
            merge_gap_s: 2.0,
            feature_window_s: 1.0,
            hop_s: 0.25,
            spectral_span_s: 2.0,
            spectral_band_hz: (1.0, 45.0),
        }
    }
}

impl GatingConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("min_window_s", self.min_window_s),
            ("max_window_s", self.max_window_s),
            ("margin_s", self.margin_s),
            ("energy_z_threshold", self.energy_z_threshold),
            ("kurtosis_threshold", self.kurtosis_threshold),
            ("peak_prominence_db", self.peak_prominence_db),
            ("merge_gap_s", self.merge_gap_s),
            ("feature_window_s", self.feature_window_s),
            ("hop_s", self.hop_s),
            ("spectral_span_s", self.spectral_span_s),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::Config(format!("gating.{name} must be finite")));
            }
        }
        if !(self.min_window_s > 0.0 && self.min_window_s <= self.max_window_s) {
            return Err(Error::Config("gating window range must satisfy 0 < min <= max".into()));
        }
        if self.margin_s < 0.0 || self.merge_gap_s < 0.0 {
            return Err(Error::Config("gating margin and merge gap must be non-negative".into()));
        }
        if !(self.hop_s > 0.0 && self.feature_window_s >= self.hop_s && self.spectral_span_s >= 2.0 * self.hop_s) {
            return Err(Error::Config("gating needs hop > 0, feature window >= hop, span >= 2 hops".into()));
        }
        if self.consensus_k == Some(0) {
            return Err(Error::Config("gating.consensus_k must be at least 1".into()));
        }
        let (lo, hi) = self.spectral_band_hz;
        if !(lo >= 0.0 && lo < hi) {
            return Err(Error::Config("gating.spectral_band_hz must satisfy 0 <= lo < hi".into()));
        }
        Ok(())
    }

    pub fn consensus_for(&self, n_channels: usize) -> usize {
        let k = self
            .consensus_k
            .unwrap_or_else(|| 2.max(n_channels.div_ceil(8)));
        k.clamp(1, n_channels.max(1))
    }

    /// Same configuration with every detection threshold multiplied by `factor`.
    pub fn scaled_thresholds(&self, factor: f64) -> Self {
        Self {
            energy_z_threshold: self.energy_z_threshold * factor,
            kurtosis_threshold: self.kurtosis_threshold * factor,
            peak_prominence_db: self.peak_prominence_db * factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Trigger {
    pub energy_z: f64,
    pub kurtosis: f64,
    pub spectral_peak_prominence: f64,
}

impl Trigger {
    fn max_with(&mut self, other: &Trigger) {
        self.energy_z = self.energy_z.max(other.energy_z);
        self.kurtosis = self.kurtosis.max(other.kurtosis);
        self.spectral_peak_prominence = self.spectral_peak_prominence.max(other.spectral_peak_prominence);
    }
}

/// A gated interval, in seconds from the start of the recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventWindow {
    pub t_start_s: f64,
    pub t_end_s: f64,
    /// Span of the active frames before padding and margins.
    pub core_start_s: f64,
    pub core_end_s: f64,
    /// Largest feature values among voting channels.
    pub trigger: Trigger,
    pub consensus_channels: Vec<usize>,
}

impl EventWindow {
    pub fn duration_s(&self) -> f64 {
        self.t_end_s - self.t_start_s
    }

    pub fn contains(&self, t0: f64, t1: f64) -> bool {
        self.t_start_s <= t0 && t1 <= self.t_end_s
    }
}

/// Per-frame features of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFeatures {
    pub energy_z: Vec<f32>,
    pub kurtosis: Vec<f32>,
    pub prominence_db: Vec<f32>,
}

impl ChannelFeatures {
    pub fn n_frames(&self) -> usize {
        self.energy_z.len()
    }

    fn trigger(&self, f: usize) -> Trigger {
        Trigger {
            energy_z: self.energy_z[f] as f64,
            kurtosis: self.kurtosis[f] as f64,
            spectral_peak_prominence: self.prominence_db[f] as f64,
        }
    }

    fn votes(&self, f: usize, cfg: &GatingConfig) -> bool {
        self.energy_z[f] as f64 > cfg.energy_z_threshold
            || self.kurtosis[f] as f64 > cfg.kurtosis_threshold
            || self.prominence_db[f] as f64 > cfg.peak_prominence_db
    }
}

/// Frame geometry in samples for a given rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGrid {
    pub hop: usize,
    pub hops_per_frame: usize,
    pub hops_per_span: usize,
    pub rate_hz: f64,
}

impl FrameGrid {
    pub fn new(cfg: &GatingConfig, rate_hz: f64) -> Self {
        let hop = (libm::round(cfg.hop_s * rate_hz) as usize).max(1);
        let hop_s = hop as f64 / rate_hz;
        let hops_per_frame = (libm::round(cfg.feature_window_s / hop_s) as usize).max(1);
        let hops_per_span = (libm::round(cfg.spectral_span_s / hop_s) as usize).max(2);
        Self {
            hop,
            hops_per_frame,
            hops_per_span,
            rate_hz,
        }
    }

    pub fn frame_len(&self) -> usize {
        self.hop * self.hops_per_frame
    }

    pub fn n_frames(&self, n_samples: usize) -> usize {
        if n_samples < self.frame_len() {
            0
        } else {
            (n_samples - self.frame_len()) / self.hop + 1
        }
    }

    pub fn frame_start_s(&self, f: usize) -> f64 {
        (f * self.hop) as f64 / self.rate_hz
    }

    pub fn frame_end_s(&self, f: usize) -> f64 {
        (f * self.hop + self.frame_len()) as f64 / self.rate_hz
    }
}

/// RMS, excess kurtosis and spectral prominence per frame for one channel.
pub fn channel_features(x: &[f64], rate_hz: f64, cfg: &GatingConfig) -> ChannelFeatures {
    let grid = FrameGrid::new(cfg, rate_hz);
    let n_frames = grid.n_frames(x.len());
    if n_frames == 0 {
        return ChannelFeatures {
            energy_z: Vec::new(),
            kurtosis: Vec::new(),
            prominence_db: Vec::new(),
        };
    }
    let (rms, kurt) = moment_features(x, &grid, n_frames);
    let energy_z = robust_z(&rms);
    let prominence_db = prominence(x, &grid, n_frames, cfg.spectral_band_hz);
    ChannelFeatures {
        energy_z,
        kurtosis: kurt,
        prominence_db,
    }
}

fn moment_features(x: &[f64], grid: &FrameGrid, n_frames: usize) -> (Vec<f64>, Vec<f32>) {
    let n_hops = n_frames + grid.hops_per_frame - 1;
    // Power sums per hop, combined per frame.
    let sums: Vec<[f64; 4]> = (0..n_hops)
        .map(|h| {
            let mut s = [0.0; 4];
            for &v in &x[h * grid.hop..(h + 1) * grid.hop] {
                let v2 = v * v;
                s[0] += v;
                s[1] += v2;
                s[2] += v2 * v;
                s[3] += v2 * v2;
            }
            s
        })
        .collect();
    let n = grid.frame_len() as f64;
    let mut rms = Vec::with_capacity(n_frames);
    let mut kurt = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let mut s = [0.0; 4];
        for hs in &sums[f..f + grid.hops_per_frame] {
            for i in 0..4 {
                s[i] += hs[i];
            }
        }
        let m = s[0] / n;
        let (e2, e3, e4) = (s[1] / n, s[2] / n, s[3] / n);
        let m2 = (e2 - m * m).max(0.0);
        let m4 = e4 - 4.0 * m * e3 + 6.0 * m * m * e2 - 3.0 * m * m * m * m;
        rms.push(libm::sqrt(e2));
        let k = if m2 > 1e-12 * e2.max(f64::MIN_POSITIVE) { m4 / (m2 * m2) - 3.0 } else { 0.0 };
        kurt.push(k as f32);
    }
    (rms, kurt)
}

/// Z-score against the median and `1.4826 * MAD` of the whole channel.
fn robust_z(v: &[f64]) -> Vec<f32> {
    let Some((med, mad)) = median_mad(v) else {
        return Vec::new();
    };
    let scale = MAD_TO_SIGMA * mad;
    v.iter()
        .map(|&r| {
            if scale > 0.0 {
                ((r - med) / scale) as f32
            } else if r > med {
                f32::INFINITY
            } else {
                0.0
            }
        })
        .collect()
}

fn prominence(x: &[f64], grid: &FrameGrid, n_frames: usize, band: (f64, f64)) -> Vec<f32> {
    // Half-overlapping one-hop segments; a frame's spectrum averages the
    // segments inside a span centred on the frame. Short segments keep the
    // per-bin variance low enough for the prominence vote on flat noise.
    let seg_len = grid.hop;
    let stride = (grid.hop / 2).max(1);
    let segs_per_hop = grid.hop / stride;
    let pg = Periodogram::new(seg_len, seg_len.next_power_of_two(), grid.rate_hz);
    let bins: Vec<usize> = (0..pg.n_bins())
        .filter(|&k| {
            let f = k as f64 * pg.bin_hz();
            f >= band.0 && f <= band.1
        })
        .collect();
    if bins.is_empty() {
        return vec![0.0; n_frames];
    }
    let nb = bins.len();
    let n_seg = (x.len() - seg_len) / stride + 1;
    let mut seg_psd = vec![0.0f32; n_seg * nb];
    let (mut buf, mut out) = (Vec::<Complex64>::new(), Vec::new());
    for s in 0..n_seg {
        pg.psd_into(&x[s * stride..s * stride + seg_len], &mut buf, &mut out);
        for (j, &k) in bins.iter().enumerate() {
            seg_psd[s * nb + j] = out[k] as f32;
        }
    }
    let per_span = (grid.hops_per_span * grid.hop - seg_len) / stride + 1;
    let centre_hop = grid.hops_per_frame / 2;
    let span_of = |f: usize| -> (usize, usize) {
        let centre = f + centre_hop;
        let first = centre.saturating_sub(grid.hops_per_span / 2) * segs_per_hop;
        let first = first.min(n_seg.saturating_sub(per_span));
        (first, (first + per_span).min(n_seg))
    };
    let smoothed = |f: usize, acc: &mut Vec<f64>| {
        let (a, b) = span_of(f);
        acc.clear();
        acc.resize(nb, 0.0);
        for s in a..b {
            for j in 0..nb {
                acc[j] += seg_psd[s * nb + j] as f64;
            }
        }
        let inv = 1.0 / (b - a) as f64;
        acc.iter_mut().for_each(|v| *v *= inv);
    };

    // Baseline: per-bin median over non-overlapping spans.
    let stride = grid.hops_per_span.max(1);
    let sample_frames: Vec<usize> = (0..n_frames).step_by(stride).collect();
    let mut per_bin = vec![Vec::with_capacity(sample_frames.len()); nb];
    let mut acc = Vec::new();
    for &f in &sample_frames {
        smoothed(f, &mut acc);
        for j in 0..nb {
            per_bin[j].push(acc[j]);
        }
    }
    let baseline: Vec<f64> = per_bin
        .iter_mut()
        .map(|v| median_in_place(v).unwrap_or(0.0))
        .collect();

    (0..n_frames)
        .map(|f| {
            smoothed(f, &mut acc);
            let mut best = 0.0f64;
            for j in 0..nb {
                let (s, b) = (acc[j], baseline[j]);
                let db = if b > 0.0 {
                    10.0 * libm::log10(s / b)
                } else if s > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                if db > best {
                    best = db;
                }
            }
            best as f32
        })
        .collect()
}

/// Merges intervals whose gap is below `gap_s`; the list is sorted first.
pub fn merge_windows(mut windows: Vec<EventWindow>, gap_s: f64) -> Vec<EventWindow> {
    windows.sort_by(|a, b| a.t_start_s.total_cmp(&b.t_start_s).then(a.t_end_s.total_cmp(&b.t_end_s)));
    let mut out: Vec<EventWindow> = Vec::with_capacity(windows.len());
    for w in windows {
        match out.last_mut() {
            Some(last) if w.t_start_s - last.t_end_s < gap_s || w.t_start_s <= last.t_end_s => {
                last.t_end_s = last.t_end_s.max(w.t_end_s);
                last.core_start_s = last.core_start_s.min(w.core_start_s);
                last.core_end_s = last.core_end_s.max(w.core_end_s);
                last.trigger.max_with(&w.trigger);
                for c in w.consensus_channels {
                    if let Err(pos) = last.consensus_channels.binary_search(&c) {
                        last.consensus_channels.insert(pos, c);
                    }
                }
            }
            _ => out.push(w),
        }
    }
    out
}

/// Turns per-channel features into event windows for a stream of
/// `duration_s` seconds.
pub fn windows_from_features(
    features: &[ChannelFeatures],
    grid: &FrameGrid,
    duration_s: f64,
    cfg: &GatingConfig,
) -> Vec<EventWindow> {
    let Some(n_frames) = features.first().map(ChannelFeatures::n_frames) else {
        return Vec::new();
    };
    let k = cfg.consensus_for(features.len());
    let mut runs: Vec<EventWindow> = Vec::new();
    let mut open: Option<EventWindow> = None;
    let mut voters = Vec::with_capacity(features.len());
    for f in 0..n_frames {
        voters.clear();
        voters.extend((0..features.len()).filter(|&c| features[c].votes(f, cfg)));
        if voters.len() >= k {
            let w = open.get_or_insert_with(|| EventWindow {
                t_start_s: grid.frame_start_s(f),
                t_end_s: grid.frame_end_s(f),
                core_start_s: grid.frame_start_s(f),
                core_end_s: grid.frame_end_s(f),
                trigger: Trigger::default(),
                consensus_channels: Vec::new(),
            });
            w.t_end_s = grid.frame_end_s(f);
            w.core_end_s = w.t_end_s;
            for &c in &voters {
                w.trigger.max_with(&features[c].trigger(f));
                if let Err(pos) = w.consensus_channels.binary_search(&c) {
                    w.consensus_channels.insert(pos, c);
                }
            }
        } else if let Some(w) = open.take() {
            runs.push(w);
        }
    }
    runs.extend(open);
    let runs = merge_windows(runs, cfg.merge_gap_s);

    let padded = runs
        .into_iter()
        .map(|mut w| {
            let len = w.t_end_s - w.t_start_s;
            if len < cfg.min_window_s {
                let extra = 0.5 * (cfg.min_window_s - len);
                w.t_start_s -= extra;
                w.t_end_s += extra;
            }
            w.t_start_s = (w.t_start_s - cfg.margin_s).max(0.0);
            w.t_end_s = (w.t_end_s + cfg.margin_s).min(duration_s);
            w
        })
        .collect();
    merge_windows(padded, cfg.merge_gap_s)
}

/// Candidate event windows on the low-rate stream of a preprocessed recording.
pub fn detect_candidates(rec: &Recording, cfg: &GatingConfig) -> Result<Vec<EventWindow>> {
    cfg.validate()?;
    let low = rec.low();
    let grid = FrameGrid::new(cfg, low.rate_hz());
    if grid.n_frames(low.len()) == 0 {
        return Ok(Vec::new());
    }
    let features: Vec<ChannelFeatures> = low
        .channels()
        .iter()
        .map(|x| channel_features(x, low.rate_hz(), cfg))
        .collect();
    Ok(windows_from_features(&features, &grid, low.duration_s(), cfg))
}

/// Samples of a window cut from one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Crop {
    pub stream: StreamId,
    pub rate_hz: f64,
    /// Index of the first sample in the source stream.
    pub start_index: usize,
    pub data: Vec<Vec<f64>>,
    /// Set when the recording had no high-rate stream.
    pub low_rate_fallback: bool,
}

impl Crop {
    pub fn len(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start_s(&self) -> f64 {
        self.start_index as f64 / self.rate_hz
    }
}

/// Cuts `[t_start_s, t_end_s)` from the high-rate stream, or from the
/// low-rate stream (flagged) when the recording has none.
pub fn crop_high_rate(rec: &Recording, w: &EventWindow) -> Result<Crop> {
    let (stream, id, fallback) = match rec.high() {
        Some(h) => (h, StreamId::High, false),
        None => (rec.low(), StreamId::Low, true),
    };
    crop_stream(stream, id, w.t_start_s, w.t_end_s, fallback)
}

pub fn crop_stream(
    stream: &crate::signal::Stream,
    id: StreamId,
    t_start_s: f64,
    t_end_s: f64,
    fallback: bool,
) -> Result<Crop> {
    if !(t_start_s.is_finite() && t_end_s.is_finite() && t_start_s <= t_end_s) {
        return Err(Error::Input(format!("invalid crop interval [{t_start_s}, {t_end_s}]")));
    }
    let rate = stream.rate_hz();
    let len = stream.len();
    let start = (libm::round(t_start_s.max(0.0) * rate) as usize).min(len);
    let n = (libm::round((t_end_s - t_start_s.max(0.0)) * rate).max(0.0) as usize).min(len - start);
    let data = stream
        .channels()
        .iter()
        .map(|c| c[start..start + n].to_vec())
        .collect();
    Ok(Crop {
        stream: id,
        rate_hz: rate,
        start_index: start,
        data,
        low_rate_fallback: fallback,
    })
}
