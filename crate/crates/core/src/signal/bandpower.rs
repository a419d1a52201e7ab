//! Band power from a sparse set of orthonormal (unitary DFT) coefficients.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::dsp::fft::{real_forward, FftPlan};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPower {
    /// Mean-square power in the band, µV².
    pub power: f64,
    /// Half-spectrum coefficients retained.
    pub stored_coeff_count: usize,
    /// Half-spectrum coefficients available (`n/2 + 1`).
    pub total_coeff_count: usize,
}

/// Unitary DFT half spectrum `X_k = n^{-1/2} sum_j x_j e^{-2 pi i jk/n}`,
/// `k = 0..=n/2`, paired with the multiplicity each coefficient has in the
/// full spectrum (1 for DC and Nyquist, 2 otherwise).
fn half_spectrum(x: &[f64]) -> Vec<(Complex64, f64)> {
    let n = x.len();
    let plan = FftPlan::new(n);
    let scale = 1.0 / libm::sqrt(n as f64);
    let full = real_forward(&plan, x);
    (0..=n / 2)
        .map(|k| {
            let weight = if k == 0 || (n % 2 == 0 && k == n / 2) { 1.0 } else { 2.0 };
            (full[k] * scale, weight)
        })
        .collect()
}

fn kept_mask(half: &[(Complex64, f64)], keep_fraction: f64) -> Result<(Vec<bool>, usize)> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::Config(format!("keep_fraction must lie in (0, 1], got {keep_fraction}")));
    }
    let m = half.len();
    let keep = (libm::ceil(keep_fraction * m as f64) as usize).clamp(1, m);
    let mut order: Vec<usize> = (0..m).collect();
    // Largest magnitude first; the stable sort keeps lower bins first on ties.
    order.sort_by(|&a, &b| half[b].0.norm_sqr().total_cmp(&half[a].0.norm_sqr()));
    let mut mask = alloc::vec![false; m];
    for &k in &order[..keep] {
        mask[k] = true;
    }
    Ok((mask, keep))
}

/// Total energy `sum |x|^2` reconstructed from the retained coefficients.
/// With `keep_fraction = 1` this is the time-domain energy (Parseval).
pub fn coefficient_energy(x: &[f64], keep_fraction: f64) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Input("empty window".into()));
    }
    let half = half_spectrum(x);
    let (mask, _) = kept_mask(&half, keep_fraction)?;
    Ok(half
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| m)
        .map(|((c, w), _)| w * c.norm_sqr())
        .sum())
}

/// Mean-square power in `band` (inclusive edges, Hz) computed from the
/// largest-magnitude `keep_fraction` of the half-spectrum coefficients.
pub fn bandpower_orthonormal(x: &[f64], rate_hz: f64, band: (f64, f64), keep_fraction: f64) -> Result<BandPower> {
    if x.is_empty() {
        return Err(Error::Input("empty window".into()));
    }
    let n = x.len();
    let half = half_spectrum(x);
    let (mask, kept) = kept_mask(&half, keep_fraction)?;
    let df = rate_hz / n as f64;
    let energy: f64 = half
        .iter()
        .enumerate()
        .filter(|&(k, _)| mask[k])
        .filter(|&(k, _)| {
            let f = k as f64 * df;
            f >= band.0 && f <= band.1
        })
        .map(|(_, (c, w))| w * c.norm_sqr())
        .sum();
    Ok(BandPower {
        power: energy / n as f64,
        stored_coeff_count: kept,
        total_coeff_count: half.len(),
    })
}
