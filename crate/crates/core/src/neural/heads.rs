use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::dsp::stats::logistic;
use crate::{Error, Result};

/// Mean-pool over patches, affine map, logistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl DetectionHead {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        Self { weights, bias }
    }

    /// Head over the gating trigger `[energy_z, kurtosis, prominence_db]`,
    /// weighted toward energy: 0.5 at an energy z-score of 4 with the other
    /// features at zero.
    pub fn trigger_default() -> Self {
        Self {
            weights: alloc::vec![1.0, 0.1, 0.05],
            bias: -4.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Score for `patches` (`n_patches x dim`).
    pub fn score(&self, patches: &Matrix) -> Result<f64> {
        if patches.cols() != self.dim() {
            return Err(Error::Shape(format!(
                "features have width {}, head expects {}",
                patches.cols(),
                self.dim()
            )));
        }
        if patches.rows() == 0 {
            return Err(Error::Input("no patches to score".into()));
        }
        let inv = 1.0 / patches.rows() as f64;
        let mut z = self.bias;
        for (c, w) in self.weights.iter().enumerate() {
            let mean: f64 = (0..patches.rows()).map(|r| patches.get(r, c)).sum::<f64>() * inv;
            z += w * mean;
        }
        if !z.is_finite() {
            // Saturate instead of propagating inf/NaN from unbounded features.
            return Ok(if z.is_nan() { 0.5 } else if z > 0.0 { 1.0 } else { 0.0 });
        }
        Ok(logistic(z))
    }

    /// Single-patch convenience.
    pub fn score_features(&self, features: &[f64]) -> Result<f64> {
        self.score(&Matrix::from_vec(1, features.len(), features.to_vec())?)
    }
}

/// Quantiles `values[h][k]` for horizon step `h` and level `levels[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileForecast {
    pub levels: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Set when any step had crossing quantiles that were sorted.
    pub reordered: bool,
}

impl QuantileForecast {
    /// Validates shapes and sorts each step so quantiles do not cross.
    pub fn new(levels: Vec<f64>, mut values: Vec<Vec<f64>>) -> Result<Self> {
        if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("quantile levels must be strictly increasing".into()));
        }
        if levels.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::Config("quantile levels must lie in (0, 1)".into()));
        }
        let mut reordered = false;
        for row in &mut values {
            if row.len() != levels.len() {
                return Err(Error::Shape(format!("step has {} values for {} levels", row.len(), levels.len())));
            }
            if row.windows(2).any(|w| w[0] > w[1]) {
                row.sort_by(f64::total_cmp);
                reordered = true;
            }
        }
        Ok(Self {
            levels,
            values,
            reordered,
        })
    }

    /// `K` levels evenly spaced in `(0, 1)`: 0.1, ..., 0.9 for `K = 9`.
    pub fn default_levels(k: usize) -> Vec<f64> {
        (1..=k).map(|i| i as f64 / (k + 1) as f64).collect()
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    pub fn level_index(&self, level: f64) -> Option<usize> {
        self.levels.iter().position(|l| libm::fabs(l - level) < 1e-12)
    }
}
