use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{FrozenMeasurement, MeasurementKind, Outcome, Provenance, Psd};
use crate::dsp::spectrum::analytic_magnitude;
use crate::dsp::stats::{logistic, median, median_mad, MAD_TO_SIGMA};
use crate::signal::{bandpower_orthonormal, Hemisphere, MontageGraph};

pub const FREQUENCY_METHOD: &str = "welch_psd/argmax/log_parabolic";

/// Arg-max of the PSD inside `band`, refined by a parabola through the
/// log-power of the peak bin and its neighbours. Ties go to the lower bin.
pub fn dominant_frequency(psd: &Psd, band: (f64, f64), prov: Provenance) -> Outcome {
    let kind = MeasurementKind::FrequencyHz;
    let bins: Vec<usize> = (0..psd.power.len())
        .filter(|&k| psd.freqs_hz[k] >= band.0 && psd.freqs_hz[k] <= band.1)
        .collect();
    let Some(&first) = bins.first() else {
        return Outcome::abstain(kind, format!("band {:?} Hz holds no PSD bins", band));
    };
    let mut peak = first;
    for &k in &bins {
        if psd.power[k] > psd.power[peak] {
            peak = k;
        }
    }
    let p0 = psd.power[peak];
    if !(p0 > 0.0) {
        return Outcome::abstain(kind, "PSD is zero throughout the band");
    }

    let df = psd.bin_hz();
    let mut offset = 0.0;
    if peak > 0 && peak + 1 < psd.power.len() {
        let (pm, pp) = (psd.power[peak - 1], psd.power[peak + 1]);
        if pm > 0.0 && pp > 0.0 {
            let (a, b, c) = (libm::log(pm), libm::log(p0), libm::log(pp));
            let denom = a - 2.0 * b + c;
            if denom < 0.0 {
                offset = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
            }
        }
    }
    let freq = (peak as f64 + offset) * df;

    let band_power: Vec<f64> = bins.iter().map(|&k| psd.power[k]).collect();
    let floor = median(&band_power).unwrap_or(0.0);
    let prominence_db = if floor > 0.0 { 10.0 * libm::log10(p0 / floor) } else { f64::INFINITY };
    let confidence = logistic((prominence_db - 6.0) / 3.0);

    let prov = prov
        .with("estimator", FREQUENCY_METHOD)
        .with("segments", psd.segment_count)
        .with("overlap", psd.overlap)
        .with("window", &psd.window_kind)
        .with("segment_len", psd.segment_len)
        .with("nfft", psd.nfft)
        .with("rate_hz", psd.rate_hz)
        .with("band_lo_hz", band.0)
        .with("band_hi_hz", band.1)
        .with("peak_bin", peak)
        .with("prominence_db", prominence_db);
    Outcome::Frozen(FrozenMeasurement::new(
        kind,
        freq,
        confidence,
        Some((freq - df, freq + df)),
        prov,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HysteresisConfig {
    /// Length of the non-overlapping RMS envelope blocks.
    pub envelope_s: f64,
    /// `T_high = median + high_k * sigma` of the envelope baseline.
    pub high_k: f64,
    pub low_k: f64,
    pub merge_gap_s: f64,
}

impl Default for HysteresisConfig {
    fn default() -> Self {
        Self {
            envelope_s: 0.25,
            high_k: 4.0,
            low_k: 2.0,
            merge_gap_s: 0.5,
        }
    }
}

impl HysteresisConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.envelope_s > 0.0 && self.envelope_s.is_finite()) {
            return Err(crate::Error::Config("hysteresis.envelope_s must be positive".into()));
        }
        if !(self.low_k.is_finite() && self.high_k.is_finite() && self.low_k < self.high_k) {
            return Err(crate::Error::Config("hysteresis needs low_k < high_k".into()));
        }
        if !(self.merge_gap_s >= 0.0 && self.merge_gap_s.is_finite()) {
            return Err(crate::Error::Config("hysteresis.merge_gap_s must be non-negative".into()));
        }
        Ok(())
    }

    pub fn block_len(&self, rate_hz: f64) -> usize {
        (libm::round(self.envelope_s * rate_hz) as usize).max(1)
    }
}

/// RMS of consecutive non-overlapping blocks; a trailing partial block is dropped.
pub fn rms_envelope(x: &[f64], block: usize) -> Vec<f64> {
    x.chunks_exact(block)
        .map(|c| libm::sqrt(c.iter().map(|v| v * v).sum::<f64>() / block as f64))
        .collect()
}

/// Block RMS of the analytic magnitude. For a sinusoid this is the
/// amplitude regardless of how many cycles a block holds.
fn analytic_envelope(x: &[f64], block: usize) -> (Vec<f64>, Vec<f64>) {
    let mag = analytic_magnitude(x);
    let env = rms_envelope(&mag, block);
    (mag, env)
}

/// Analytic samples per baseline chunk; bounds FFT size on long channels.
const BASELINE_CHUNK: usize = 1 << 16;

/// Median and `1.4826 * MAD` of the block envelope of a whole channel.
pub fn envelope_baseline(x: &[f64], rate_hz: f64, cfg: &HysteresisConfig) -> Option<(f64, f64)> {
    let block = cfg.block_len(rate_hz);
    let chunk = (BASELINE_CHUNK / block).max(1) * block;
    let mut env = Vec::with_capacity(x.len() / block);
    for c in x.chunks(chunk) {
        env.extend(analytic_envelope(c, block).1);
    }
    median_mad(&env).map(|(m, mad)| (m, MAD_TO_SIGMA * mad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DurationEstimate {
    /// Seconds from the start of the analysed window.
    pub onset_s: f64,
    pub duration_s: f64,
    pub t_high: f64,
    pub t_low: f64,
    /// Peak envelope over `T_high`, dB.
    pub margin_db: f64,
}

/// Hysteresis segmentation of the block envelope. `baseline` is the
/// envelope median and scale; when absent it is taken from `x` itself.
///
/// Blocks decide where the event is; its edges are then placed where the
/// smoothed analytic magnitude crosses halfway between the baseline and
/// the event level, which resolves them below one block.
pub fn estimate_duration(
    x: &[f64],
    rate_hz: f64,
    cfg: &HysteresisConfig,
    baseline: Option<(f64, f64)>,
) -> core::result::Result<DurationEstimate, alloc::string::String> {
    let block = cfg.block_len(rate_hz);
    let (mag, env) = analytic_envelope(x, block);
    if env.is_empty() {
        return Err(format!("window shorter than one {} s envelope block", cfg.envelope_s));
    }
    let (med, sigma) = match baseline {
        Some(b) => b,
        None => median_mad(&env).map(|(m, mad)| (m, MAD_TO_SIGMA * mad)).unwrap_or((0.0, 0.0)),
    };
    let t_high = med + cfg.high_k * sigma;
    let t_low = med + cfg.low_k * sigma;
    let bs = block as f64 / rate_hz;

    // Hysteresis runs as half-open block ranges.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut k = 0;
    while k < env.len() {
        if env[k] > t_high {
            let mut a = k;
            while a > 0 && env[a - 1] > t_low {
                a -= 1;
            }
            let mut b = k + 1;
            while b < env.len() && env[b] >= t_low {
                b += 1;
            }
            match runs.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => runs.push((a, b)),
            }
            k = b;
        } else {
            k += 1;
        }
    }
    if runs.is_empty() {
        return Err(format!("envelope never exceeds T_high = {t_high:.3}"));
    }
    let gap_blocks = cfg.merge_gap_s / bs;
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for r in runs {
        match merged.last_mut() {
            Some(last) if ((r.0 - last.1) as f64) < gap_blocks => last.1 = r.1,
            _ => merged.push(r),
        }
    }
    let (a, b) = merged
        .iter()
        .copied()
        .fold((0, 0), |best, r| if r.1 - r.0 > best.1 - best.0 { r } else { best });

    let event_level = if b - a >= 3 {
        median(&env[a + 1..b - 1]).unwrap_or(0.0)
    } else {
        env[a..b].iter().copied().fold(0.0, f64::max)
    };
    let half = 0.5 * (med.min(event_level) + event_level);
    let smooth = moving_average(&mag, (libm::round(EDGE_SMOOTH_S * rate_hz) as usize).max(1));
    let lo = a.saturating_sub(1) * block;
    let hi = ((b + 1) * block).min(smooth.len());
    let first = (lo..hi).find(|&i| smooth[i] >= half).unwrap_or(a * block);
    let last = (lo..hi).rev().find(|&i| smooth[i] >= half).unwrap_or(b * block - 1);
    let onset = first as f64 / rate_hz;
    let end = (last + 1) as f64 / rate_hz;

    let peak = env[a..b].iter().copied().fold(0.0, f64::max);
    let margin_db = if t_high > 0.0 { 20.0 * libm::log10(peak / t_high) } else { f64::INFINITY };
    Ok(DurationEstimate {
        onset_s: onset,
        duration_s: (end - onset).max(0.0),
        t_high,
        t_low,
        margin_db,
    })
}

/// Length of the centred moving average applied before edge placement.
const EDGE_SMOOTH_S: f64 = 0.1;

fn moving_average(x: &[f64], len: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v;
        prefix.push(acc);
    }
    let half = len / 2;
    (0..n)
        .map(|i| {
            let a = i.saturating_sub(half);
            let b = (i + len - half).min(n);
            (prefix[b] - prefix[a]) / (b - a) as f64
        })
        .collect()
}

/// Duration of the longest hysteresis event in `x`.
pub fn event_duration(
    x: &[f64],
    rate_hz: f64,
    cfg: &HysteresisConfig,
    baseline: Option<(f64, f64)>,
    prov: Provenance,
) -> Outcome {
    let kind = MeasurementKind::DurationS;
    match estimate_duration(x, rate_hz, cfg, baseline) {
        Ok(d) => {
            let mut prov = prov
                .with("envelope_s", cfg.envelope_s)
                .with("high_k", cfg.high_k)
                .with("low_k", cfg.low_k)
                .with("merge_gap_s", cfg.merge_gap_s)
                .with("t_high", d.t_high)
                .with("t_low", d.t_low)
                .with("onset_in_window_s", d.onset_s);
            if let Some((m, s)) = baseline {
                prov = prov.with("baseline_median", m).with("baseline_sigma", s);
            }
            let confidence = logistic(d.margin_db / 3.0);
            Outcome::Frozen(FrozenMeasurement::new(kind, d.duration_s, confidence, None, prov))
        }
        Err(reason) => Outcome::abstain(kind, reason),
    }
}

/// `1.4826 * median(|x - median(x)|)`.
pub fn robust_amplitude(x: &[f64]) -> Option<f64> {
    median_mad(x).map(|(_, mad)| MAD_TO_SIGMA * mad)
}

pub fn event_amplitude(x: &[f64], prov: Provenance) -> Outcome {
    let kind = MeasurementKind::AmplitudeUv;
    match robust_amplitude(x) {
        Some(a) => Outcome::Frozen(FrozenMeasurement::new(
            kind,
            a,
            0.9,
            None,
            prov.with("estimator", "robust_mad").with("scale", MAD_TO_SIGMA),
        )),
        None => Outcome::abstain(kind, "empty amplitude crop"),
    }
}

/// `(P_L - P_R) / (P_L + P_R)` from mean band power per hemisphere;
/// midline channels do not count. `channels[c]` is montage node `c`.
pub fn lateralization(
    channels: &[Vec<f64>],
    rate_hz: f64,
    band: (f64, f64),
    keep_fraction: f64,
    montage: &MontageGraph,
    prov: Provenance,
) -> Outcome {
    let kind = MeasurementKind::LateralizationIndex;
    if channels.len() != montage.n_nodes() {
        return Outcome::abstain(kind, "channel count does not match montage");
    }
    let side_power = |side: Hemisphere| -> core::result::Result<Option<f64>, alloc::string::String> {
        let nodes = montage.nodes_in(side);
        if nodes.is_empty() {
            return Ok(None);
        }
        let mut total = 0.0;
        for &c in &nodes {
            total += bandpower_orthonormal(&channels[c], rate_hz, band, keep_fraction)
                .map_err(|e| format!("{e}"))?
                .power;
        }
        Ok(Some(total / nodes.len() as f64))
    };
    let (pl, pr) = match (side_power(Hemisphere::Left), side_power(Hemisphere::Right)) {
        (Ok(Some(l)), Ok(Some(r))) => (l, r),
        (Err(e), _) | (_, Err(e)) => return Outcome::abstain(kind, e),
        _ => return Outcome::abstain(kind, "montage lacks a left or right channel"),
    };
    let sum = pl + pr;
    if !(sum > 0.0) {
        return Outcome::abstain(kind, "no band power in either hemisphere");
    }
    let index = (pl - pr) / sum;
    let prov = prov
        .with("estimator", "hemispheric_band_power_ratio")
        .with("band_lo_hz", band.0)
        .with("band_hi_hz", band.1)
        .with("keep_fraction", keep_fraction)
        .with("power_left", pl)
        .with("power_right", pr)
        .with("rate_hz", rate_hz);
    let confidence = logistic(10.0 * libm::fabs(index) - 1.0);
    Outcome::Frozen(FrozenMeasurement::new(kind, index, confidence, None, prov))
}
