use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::spectrum::Periodogram;
use crate::{Error, Result};

/// Shortest segment the estimator accepts.
pub const MIN_SEGMENT_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WelchConfig {
    pub segments: usize,
    pub overlap: f64,
    /// FFT length as a multiple of the segment length (rounded up to a power of two).
    pub zero_pad_factor: usize,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            segments: 8,
            overlap: 0.5,
            zero_pad_factor: 4,
        }
    }
}

impl WelchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.segments == 0 {
            return Err(Error::Config("welch.segments must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::Config("welch.overlap must lie in [0, 1)".into()));
        }
        if self.zero_pad_factor == 0 {
            return Err(Error::Config("welch.zero_pad_factor must be at least 1".into()));
        }
        Ok(())
    }

    /// Segment length and step for a window of `n` samples.
    pub fn layout(&self, n: usize) -> Result<(usize, usize)> {
        self.validate()?;
        let u = self.segments;
        let denom = 1.0 + (u - 1) as f64 * (1.0 - self.overlap);
        let mut len = libm::floor(n as f64 / denom) as usize;
        loop {
            if len < MIN_SEGMENT_LEN {
                return Err(Error::TooShort(format!(
                    "{n} samples cannot hold {u} segments of at least {MIN_SEGMENT_LEN} at overlap {}; reduce segments",
                    self.overlap
                )));
            }
            let step = (libm::round(len as f64 * (1.0 - self.overlap)) as usize).max(1);
            if (u - 1) * step + len <= n {
                return Ok((len, step));
            }
            len -= 1;
        }
    }
}

/// One-sided power spectral density on a uniform grid from 0 to Nyquist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub freqs_hz: Vec<f64>,
    /// µV²/Hz per bin.
    pub power: Vec<f64>,
    pub segment_count: usize,
    pub segment_len: usize,
    pub nfft: usize,
    pub window_kind: alloc::string::String,
    pub overlap: f64,
    pub rate_hz: f64,
}

impl Psd {
    pub fn bin_hz(&self) -> f64 {
        self.rate_hz / self.nfft as f64
    }

    /// Bin-wise mean of PSDs computed on the same grid.
    pub fn average(psds: &[Psd]) -> Option<Psd> {
        let first = psds.first()?;
        let mut out = first.clone();
        for p in &psds[1..] {
            if p.power.len() != out.power.len() {
                return None;
            }
            for (o, v) in out.power.iter_mut().zip(&p.power) {
                *o += v;
            }
        }
        let inv = 1.0 / psds.len() as f64;
        out.power.iter_mut().for_each(|v| *v *= inv);
        Some(out)
    }
}

/// Welch estimate: `U` Hann-windowed, mean-removed segments, each periodogram
/// normalized by `fs * sum(w^2)`, then averaged.
pub fn welch_psd(x: &[f64], rate_hz: f64, cfg: &WelchConfig) -> Result<Psd> {
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::Input(format!("invalid sample rate {rate_hz}")));
    }
    let (len, step) = cfg.layout(x.len())?;
    let nfft = (len * cfg.zero_pad_factor).next_power_of_two();
    let pg = Periodogram::new(len, nfft, rate_hz);
    let mut acc = alloc::vec![0.0; pg.n_bins()];
    let (mut buf, mut out) = (Vec::<Complex64>::new(), Vec::new());
    for u in 0..cfg.segments {
        pg.psd_into(&x[u * step..u * step + len], &mut buf, &mut out);
        for (a, v) in acc.iter_mut().zip(&out) {
            *a += v;
        }
    }
    let inv = 1.0 / cfg.segments as f64;
    acc.iter_mut().for_each(|v| *v *= inv);
    let df = pg.bin_hz();
    Ok(Psd {
        freqs_hz: (0..pg.n_bins()).map(|k| k as f64 * df).collect(),
        power: acc,
        segment_count: cfg.segments,
        segment_len: len,
        nfft,
        window_kind: "hann".into(),
        overlap: cfg.overlap,
        rate_hz,
    })
}
