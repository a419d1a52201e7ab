//! Windowed periodograms shared by gating and the Welch estimator.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::FftPlan;

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / n as f64))
        .collect()
}

/// One-sided periodogram of fixed-length segments: mean removed, Hann
/// tapered, zero-padded to `nfft`, scaled to power spectral density.
#[derive(Debug, Clone)]
pub struct Periodogram {
    seg_len: usize,
    nfft: usize,
    rate_hz: f64,
    window: Vec<f64>,
    window_power: f64,
    plan: FftPlan,
}

impl Periodogram {
    pub fn new(seg_len: usize, nfft: usize, rate_hz: f64) -> Self {
        assert!(seg_len >= 1 && nfft >= seg_len);
        let window = hann(seg_len);
        let window_power = window.iter().map(|w| w * w).sum();
        Self {
            seg_len,
            nfft,
            rate_hz,
            window,
            window_power,
            plan: FftPlan::new(nfft),
        }
    }

    pub fn seg_len(&self) -> usize {
        self.seg_len
    }

    pub fn nfft(&self) -> usize {
        self.nfft
    }

    pub fn n_bins(&self) -> usize {
        self.nfft / 2 + 1
    }

    pub fn bin_hz(&self) -> f64 {
        self.rate_hz / self.nfft as f64
    }

    /// PSD of `seg` (length `seg_len`) in units²/Hz, bins `0..=nfft/2`.
    pub fn psd(&self, seg: &[f64], buf: &mut Vec<Complex64>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_bins());
        self.psd_into(seg, buf, &mut out);
        out
    }

    pub fn psd_into(&self, seg: &[f64], buf: &mut Vec<Complex64>, out: &mut Vec<f64>) {
        debug_assert_eq!(seg.len(), self.seg_len);
        let mean = seg.iter().sum::<f64>() / seg.len() as f64;
        buf.clear();
        buf.extend(
            seg.iter()
                .zip(&self.window)
                .map(|(x, w)| Complex64::new((x - mean) * w, 0.0)),
        );
        buf.resize(self.nfft, Complex64::new(0.0, 0.0));
        self.plan.forward(buf);
        let scale = 1.0 / (self.rate_hz * self.window_power);
        let last = self.nfft / 2;
        out.clear();
        out.extend((0..=last).map(|k| {
            let p = buf[k].norm_sqr() * scale;
            if k == 0 || (self.nfft % 2 == 0 && k == last) {
                p
            } else {
                2.0 * p
            }
        }));
    }
}

/// Magnitude of the analytic signal `|x + i H{x}|`, with `H` the discrete
/// Hilbert transform computed through one FFT of the whole input.
pub fn analytic_magnitude(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let plan = FftPlan::new(n);
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.forward(&mut buf);
    // Keep DC (and Nyquist for even n), double positive frequencies, drop negative ones.
    let half = n / 2;
    for (k, b) in buf.iter_mut().enumerate() {
        let gain = if k == 0 || (n % 2 == 0 && k == half) {
            1.0
        } else if k <= (n - 1) / 2 {
            2.0
        } else {
            0.0
        };
        *b *= gain;
    }
    plan.inverse(&mut buf);
    buf.iter().map(|c| c.norm()).collect()
}
