//! Small robust-statistics helpers.

use alloc::vec::Vec;

/// Consistency constant turning a median absolute deviation into a
/// Gaussian standard-deviation estimate.
pub const MAD_TO_SIGMA: f64 = 1.4826;

/// Median of `values`; the two middle order statistics are averaged for
/// even lengths. Returns `None` for an empty slice.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.to_vec();
    median_in_place(&mut v)
}

/// Like [`median`] but reorders `values`.
pub fn median_in_place(values: &mut [f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mid = n / 2;
    let (lower, upper_mid, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper_mid = *upper_mid;
    if n % 2 == 1 {
        return Some(upper_mid);
    }
    let lower_mid = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(0.5 * (lower_mid + upper_mid))
}

/// Median and raw (unscaled) median absolute deviation.
pub fn median_mad(values: &[f64]) -> Option<(f64, f64)> {
    let med = median(values)?;
    let mut dev: Vec<f64> = values.iter().map(|v| libm::fabs(v - med)).collect();
    let mad = median_in_place(&mut dev)?;
    Some((med, mad))
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Root mean square.
pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    libm::sqrt(values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64)
}

/// Excess kurtosis (population moments); zero for constant input.
pub fn excess_kurtosis(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in values {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    if m2 <= 0.0 {
        return 0.0;
    }
    m4 / (m2 * m2) - 3.0
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}
