use alloc::format;

use super::QuantileForecast;
use crate::{Error, Result};

/// Check function `rho_alpha(u) = u * (alpha - 1[u < 0])`.
pub fn pinball(alpha: f64, u: f64) -> f64 {
    u * (alpha - if u < 0.0 { 1.0 } else { 0.0 })
}

/// Sum over horizon steps and levels of `rho_alpha(y_h - q_{alpha,h})`.
pub fn pinball_loss(y: &[f64], forecast: &QuantileForecast) -> Result<f64> {
    if y.len() != forecast.horizon() {
        return Err(Error::Shape(format!(
            "{} targets for a horizon of {}",
            y.len(),
            forecast.horizon()
        )));
    }
    let mut total = 0.0;
    for (yh, row) in y.iter().zip(&forecast.values) {
        for (alpha, q) in forecast.levels.iter().zip(row) {
            total += pinball(*alpha, yh - q);
        }
    }
    Ok(total)
}

/// `sum_b |F_p(b) - F_y(b)|` against a one-hot target at `target_bin`
/// (1-based, `1 <= target_bin <= p.len()`).
pub fn emd_loss(p: &[f64], target_bin: usize) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::Input("empty distribution".into()));
    }
    if !(1..=p.len()).contains(&target_bin) {
        return Err(Error::Input(format!("target bin {target_bin} outside 1..={}", p.len())));
    }
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Input("probabilities must be finite and non-negative".into()));
    }
    let total: f64 = p.iter().sum();
    if libm::fabs(total - 1.0) > 1e-6 {
        return Err(Error::Input(format!("probabilities sum to {total}, not 1")));
    }
    let mut cdf = 0.0;
    let mut loss = 0.0;
    for (i, v) in p.iter().enumerate() {
        cdf += v;
        let target = if i + 1 >= target_bin { 1.0 } else { 0.0 };
        loss += libm::fabs(cdf - target);
    }
    Ok(loss)
}

pub const FOCAL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalLoss {
    pub value: f64,
    /// `p_true` was below `FOCAL_EPS` and was clamped.
    pub clamped: bool,
}

/// `-alpha_w * (1 - p)^gamma * ln p`.
pub fn focal_loss(p_true: f64, gamma: f64, alpha_w: f64) -> Result<FocalLoss> {
    if !(0.0..=1.0).contains(&p_true) {
        return Err(Error::Input(format!("p_true {p_true} outside [0, 1]")));
    }
    let clamped = p_true < FOCAL_EPS;
    let p = p_true.max(FOCAL_EPS);
    let value = -alpha_w * libm::pow(1.0 - p, gamma) * libm::log(p);
    // -0.0 at p = 1
    Ok(FocalLoss {
        value: value + 0.0,
        clamped,
    })
}
