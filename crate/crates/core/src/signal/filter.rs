//! Zero-phase IIR preprocessing.
//!
//! A line-noise notch (single biquad, Q = 30) followed by a 4th-order
//! Butterworth high-pass and a 4th-order Butterworth low-pass, each built
//! from two cascaded 2nd-order sections. The cascade runs forward then
//! backward over a mirrored extension of the signal, with every
//! section started from its steady state for the first input sample, so
//! the result has zero phase and no start-up step.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{Recording, Stream};
use crate::{Error, Result};

pub const NOTCH_Q: f64 = 30.0;

/// Q factors of the two sections of a 4th-order Butterworth filter.
const BUTTERWORTH4_Q: [f64; 2] = [0.541_196_100_146_197, 1.306_562_964_876_376_7];

/// One 2nd-order section in transposed direct form II; `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn normalized(b0: f64, b1: f64, b2: f64, a0: f64, a1: f64, a2: f64) -> Self {
        Self {
            b0: b0 / a0,
            b1: b1 / a0,
            b2: b2 / a0,
            a1: a1 / a0,
            a2: a2 / a0,
        }
    }

    pub fn notch(f0: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * f0 / fs;
        let alpha = libm::sin(w0) / (2.0 * q);
        let c = libm::cos(w0);
        Self::normalized(1.0, -2.0 * c, 1.0, 1.0 + alpha, -2.0 * c, 1.0 - alpha)
    }

    pub fn highpass(fc: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let alpha = libm::sin(w0) / (2.0 * q);
        let c = libm::cos(w0);
        Self::normalized(
            (1.0 + c) / 2.0,
            -(1.0 + c),
            (1.0 + c) / 2.0,
            1.0 + alpha,
            -2.0 * c,
            1.0 - alpha,
        )
    }

    pub fn lowpass(fc: f64, q: f64, fs: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let alpha = libm::sin(w0) / (2.0 * q);
        let c = libm::cos(w0);
        Self::normalized(
            (1.0 - c) / 2.0,
            1.0 - c,
            (1.0 - c) / 2.0,
            1.0 + alpha,
            -2.0 * c,
            1.0 - alpha,
        )
    }

    /// Filter state that makes a constant input `x0` produce a constant output.
    fn steady_state(&self, x0: f64) -> (f64, f64) {
        let gain = (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2);
        let y0 = gain * x0;
        let z2 = self.b2 * x0 - self.a2 * y0;
        let z1 = self.b1 * x0 - self.a1 * y0 + z2;
        (z1, z2)
    }

    fn run(&self, data: &mut [f64]) {
        let Some(&x0) = data.first() else { return };
        let (mut z1, mut z2) = self.steady_state(x0);
        for v in data.iter_mut() {
            let x = *v;
            let y = self.b0 * x + z1;
            z1 = self.b1 * x - self.a1 * y + z2;
            z2 = self.b2 * x - self.a2 * y;
            *v = y;
        }
    }

    /// Single-pass magnitude response at `f` Hz.
    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        let (c1, s1, c2, s2) = (libm::cos(w), libm::sin(w), libm::cos(2.0 * w), libm::sin(2.0 * w));
        let num_re = self.b0 + self.b1 * c1 + self.b2 * c2;
        let num_im = -(self.b1 * s1 + self.b2 * s2);
        let den_re = 1.0 + self.a1 * c1 + self.a2 * c2;
        let den_im = -(self.a1 * s1 + self.a2 * s2);
        libm::sqrt((num_re * num_re + num_im * num_im) / (den_re * den_re + den_im * den_im))
    }
}

/// The preprocessing cascade for one sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    sections: Vec<Biquad>,
    pad_len: usize,
}

impl SosFilter {
    /// Notch (optional) plus a band-pass `band = (lo, hi)` at rate `fs`.
    pub fn design(notch_hz: Option<f64>, band: (f64, f64), fs: f64) -> Result<Self> {
        let nyquist = fs / 2.0;
        let (lo, hi) = band;
        if !(lo > 0.0 && lo < hi) {
            return Err(Error::Config(format!("band edges must satisfy 0 < lo < hi, got ({lo}, {hi})")));
        }
        if hi >= nyquist {
            return Err(Error::Config(format!(
                "band edge {hi} Hz is at or above the Nyquist frequency {nyquist} Hz"
            )));
        }
        let mut sections = Vec::with_capacity(5);
        if let Some(f0) = notch_hz {
            if !(f0 > 0.0 && f0 < nyquist) {
                return Err(Error::Config(format!(
                    "notch {f0} Hz must lie strictly between 0 and the Nyquist frequency {nyquist} Hz"
                )));
            }
            sections.push(Biquad::notch(f0, NOTCH_Q, fs));
        }
        for q in BUTTERWORTH4_Q {
            sections.push(Biquad::highpass(lo, q, fs));
        }
        for q in BUTTERWORTH4_Q {
            sections.push(Biquad::lowpass(hi, q, fs));
        }
        // Long enough for the high-pass transient to die out in the padding.
        let pad_len = libm::ceil(3.0 * fs / lo) as usize;
        Ok(Self { sections, pad_len })
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Zero-phase response magnitude (forward-backward squares the single pass).
    pub fn zero_phase_gain(&self, f: f64, fs: f64) -> f64 {
        let single: f64 = self.sections.iter().map(|s| s.magnitude(f, fs)).product();
        single * single
    }

    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = self.pad_len.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        // Mirror (even) extension: an odd extension would add a step of
        // 2*x[end] whenever a record ends mid-oscillation, and the slow
        // high-pass sections ring on that step for seconds.
        ext.extend((1..=pad).rev().map(|i| x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| x[n - 1 - i]));

        for s in &self.sections {
            s.run(&mut ext);
        }
        ext.reverse();
        for s in &self.sections {
            s.run(&mut ext);
        }
        ext.reverse();
        ext.drain(..pad);
        ext.truncate(n);
        ext
    }
}

/// Filters one channel; see [`preprocess`].
pub fn preprocess_channel(x: &[f64], rate_hz: f64, notch_hz: Option<f64>, band: (f64, f64)) -> Result<Vec<f64>> {
    Ok(SosFilter::design(notch_hz, band, rate_hz)?.filtfilt(x))
}

/// Notch and band-pass every channel of both streams with zero phase.
pub fn preprocess(rec: &Recording, notch_hz: Option<f64>, band: (f64, f64)) -> Result<Recording> {
    let filter_stream = |s: &Stream| -> Result<Stream> {
        let filt = SosFilter::design(notch_hz, band, s.rate_hz())?;
        let channels = s.channels().iter().map(|c| filt.filtfilt(c)).collect();
        Stream::new(s.rate_hz(), channels)
    };
    let low = filter_stream(rec.low())?;
    let high = rec.high().map(filter_stream).transpose()?;
    let notch = match notch_hz {
        Some(f) => format!("notch {f} Hz (Q {NOTCH_Q}), "),
        None => alloc::string::String::new(),
    };
    Ok(rec.replace_streams(low, high).with_note(format!(
        "preprocess: {notch}butterworth-4 band-pass {}-{} Hz, forward-backward",
        band.0, band.1
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tone(f: f64, fs: f64, secs: f64) -> Vec<f64> {
        (0..(fs * secs) as usize)
            .map(|i| libm::sin(2.0 * PI * f * i as f64 / fs))
            .collect()
    }

    fn rms(x: &[f64]) -> f64 {
        crate::dsp::stats::rms(x)
    }

    #[test]
    fn frequency_sweep_oracle() {
        // Dense sweep of the analytic response: the passband stays within
        // +-1 dB over 2-60 Hz away from the notch, the notch removes 60 Hz.
        let filt = SosFilter::design(Some(60.0), (0.5, 80.0), 256.0).unwrap();
        let mut f = 2.0;
        while f <= 50.0 {
            let g_db = 20.0 * libm::log10(filt.zero_phase_gain(f, 256.0));
            assert!(g_db.abs() < 1.0, "{f} Hz: {g_db} dB");
            f += 0.05;
        }
        assert!(filt.zero_phase_gain(60.0, 256.0) < 1e-6);
    }

    #[test]
    fn notch_removes_line_tone() {
        // Steady state: the Q = 30 notch rings for about a second after a
        // record edge, so the first and last 2 s are excluded.
        let x = tone(60.0, 256.0, 20.0);
        let y = preprocess_channel(&x, 256.0, Some(60.0), (0.5, 80.0)).unwrap();
        let inner = 512..x.len() - 512;
        let ratio = rms(&y[inner.clone()]) / rms(&x[inner]);
        assert!(ratio <= 0.01, "ratio {ratio}");
    }

    #[test]
    fn passband_tone_is_preserved() {
        let x = tone(10.0, 256.0, 20.0);
        let y = preprocess_channel(&x, 256.0, Some(60.0), (0.5, 80.0)).unwrap();
        let db = 20.0 * libm::log10(rms(&y) / rms(&x));
        assert!(db.abs() <= 1.0, "{db} dB");
    }

    #[test]
    fn dc_is_removed() {
        let x = vec![37.5; 256 * 30];
        let y = preprocess_channel(&x, 256.0, Some(60.0), (0.5, 80.0)).unwrap();
        let worst = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-6 * 37.5, "max |y| = {worst}");
    }

    #[test]
    fn zero_phase_keeps_burst_centered() {
        let fs = 256.0;
        let mut x = vec![0.0; 256 * 20];
        for (i, v) in x.iter_mut().enumerate().skip(256 * 8).take(256 * 4) {
            *v = libm::sin(2.0 * PI * 8.0 * i as f64 / fs);
        }
        let y = preprocess_channel(&x, fs, Some(60.0), (0.5, 80.0)).unwrap();
        let energy_center = |s: &[f64]| {
            let (mut num, mut den) = (0.0, 0.0);
            for (i, v) in s.iter().enumerate() {
                num += i as f64 * v * v;
                den += v * v;
            }
            num / den
        };
        assert!((energy_center(&x) - energy_center(&y)).abs() < 2.0);
    }

    #[test]
    fn cutoff_above_nyquist_is_a_config_error() {
        assert!(matches!(
            SosFilter::design(Some(60.0), (0.5, 130.0), 256.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            SosFilter::design(Some(200.0), (0.5, 80.0), 256.0),
            Err(Error::Config(_))
        ));
    }
}
