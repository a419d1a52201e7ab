//! Online conformal adjustment of forecast quantiles, with a CUSUM monitor
//! on the residual stream that triggers a buffer reset.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::neural::QuantileForecast;
use crate::{Error, Result};

/// Below this many residuals the adjustment is a pass-through.
pub const MIN_RESIDUALS: usize = 10;
/// Residuals needed before the CUSUM starts accumulating.
pub const CUSUM_WARMUP: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub capacity: usize,
    /// Target coverage of the adjusted quantile.
    pub level: f64,
    pub cusum_k: f64,
    pub cusum_h: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            capacity: 256,
            level: 0.9,
            cusum_k: 0.5,
            cusum_h: 8.0,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(Error::Config("calibration capacity must be positive".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("calibration level {} outside (0, 1)", self.level)));
        }
        if !(self.cusum_k >= 0.0 && self.cusum_h > 0.0 && self.cusum_h.is_finite()) {
            return Err(Error::Config("CUSUM needs k >= 0 and a finite h > 0".into()));
        }
        Ok(())
    }
}

/// Upper CUSUM on standardized residuals. Only upward residual shifts
/// (observations above the adjusted quantile) erode coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cusum {
    pub upper: f64,
    pub k: f64,
    pub h: f64,
}

impl Cusum {
    pub fn new(k: f64, h: f64) -> Self {
        Self { upper: 0.0, k, h }
    }

    pub fn value(&self) -> f64 {
        self.upper
    }

    pub fn triggered(&self) -> bool {
        self.value() >= self.h
    }

    pub fn update(&mut self, z: f64) {
        self.upper = (self.upper + z - self.k).max(0.0);
    }

    pub fn reset(&mut self) {
        self.upper = 0.0;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeEvent {
    /// Observation count at the reset.
    pub step: u64,
    pub timestamp: String,
    pub cusum: f64,
    pub discarded: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recalibration {
    Reset,
    /// Called without a trigger; nothing changed except the warning count.
    NotTriggered,
}

/// Adjusted quantile plus whether enough residuals backed it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adjusted {
    pub value: f64,
    pub calibrated: bool,
}

/// Residual buffer for one quantile level. Serializes as a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalState {
    pub level: f64,
    pub capacity: usize,
    residuals: VecDeque<f64>,
    adjustment: f64,
    pub cusum: Cusum,
    steps: u64,
    pub log: Vec<ChangeEvent>,
    pub spurious_recalibrations: u32,
}

impl ConformalState {
    pub fn new(cfg: &CalibrationConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            level: cfg.level,
            capacity: cfg.capacity,
            residuals: VecDeque::with_capacity(cfg.capacity),
            adjustment: 0.0,
            cusum: Cusum::new(cfg.cusum_k, cfg.cusum_h),
            steps: 0,
            log: Vec::new(),
            spurious_recalibrations: 0,
        })
    }

    pub fn residuals(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.residuals.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    pub fn is_calibrated(&self) -> bool {
        self.residuals.len() >= MIN_RESIDUALS
    }

    pub fn adjustment(&self) -> f64 {
        self.adjustment
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// `q_hat + adjustment`, or `q_hat` unchanged while uncalibrated.
    pub fn adjust(&self, q_hat: f64) -> Adjusted {
        if self.is_calibrated() {
            Adjusted {
                value: q_hat + self.adjustment,
                calibrated: true,
            }
        } else {
            Adjusted {
                value: q_hat,
                calibrated: false,
            }
        }
    }

    /// Records `y - q_hat`. The CUSUM sees the residual standardized against
    /// the buffer as it was before this observation.
    pub fn observe(&mut self, y: f64, q_hat: f64) {
        let r = y - q_hat;
        if !r.is_finite() {
            return;
        }
        self.steps += 1;
        if self.residuals.len() >= CUSUM_WARMUP {
            let n = self.residuals.len() as f64;
            let mean = self.residuals.iter().sum::<f64>() / n;
            let var = self.residuals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            let sd = libm::sqrt(var);
            if sd > 0.0 {
                self.cusum.update((r - mean) / sd);
            }
        }
        if self.residuals.len() == self.capacity {
            self.residuals.pop_front();
        }
        self.residuals.push_back(r);
        self.adjustment = conformal_quantile(self.residuals.iter().copied(), self.level).unwrap_or(0.0);
    }

    pub fn triggered(&self) -> bool {
        self.cusum.triggered()
    }

    /// Clears the buffer after a change point. `timestamp` is caller supplied
    /// and only logged.
    pub fn recalibrate_on_change(&mut self, timestamp: &str) -> Recalibration {
        if !self.triggered() {
            self.spurious_recalibrations += 1;
            return Recalibration::NotTriggered;
        }
        self.log.push(ChangeEvent {
            step: self.steps,
            timestamp: timestamp.into(),
            cusum: self.cusum.value(),
            discarded: self.residuals.len(),
        });
        self.residuals.clear();
        self.adjustment = 0.0;
        self.cusum.reset();
        Recalibration::Reset
    }
}

/// Order statistic at rank `ceil((n + 1) * level)` clamped to `[1, n]`.
pub fn conformal_quantile(residuals: impl Iterator<Item = f64>, level: f64) -> Option<f64> {
    let mut v: Vec<f64> = residuals.collect();
    let n = v.len();
    if n == 0 {
        return None;
    }
    // Guard against products like 10 * 0.9 landing a hair above an integer.
    let rank = libm::ceil((n + 1) as f64 * level - 1e-9) as usize;
    let idx = rank.clamp(1, n) - 1;
    let (_, x, _) = v.select_nth_unstable_by(idx, f64::total_cmp);
    Some(*x)
}

/// One state per forecast level, each targeting that level's own coverage;
/// residuals are pooled over horizon steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileCalibrator {
    pub states: Vec<ConformalState>,
}

impl QuantileCalibrator {
    pub fn new(levels: &[f64], cfg: &CalibrationConfig) -> Result<Self> {
        let states = levels
            .iter()
            .map(|&level| ConformalState::new(&CalibrationConfig { level, ..cfg.clone() }))
            .collect::<Result<_>>()?;
        Ok(Self { states })
    }

    fn check(&self, f: &QuantileForecast) -> Result<()> {
        if f.levels.len() != self.states.len() {
            return Err(Error::Shape(format!(
                "forecast has {} levels, calibrator {}",
                f.levels.len(),
                self.states.len()
            )));
        }
        Ok(())
    }

    /// Adjusted copy of `f`; re-sorted if the adjustments cross.
    pub fn adjust(&self, f: &QuantileForecast) -> Result<QuantileForecast> {
        self.check(f)?;
        let values = f
            .values
            .iter()
            .map(|row| row.iter().zip(&self.states).map(|(q, s)| s.adjust(*q).value).collect())
            .collect();
        QuantileForecast::new(f.levels.clone(), values)
    }

    pub fn observe(&mut self, y: &[f64], f: &QuantileForecast) -> Result<()> {
        self.check(f)?;
        if y.len() != f.horizon() {
            return Err(Error::Shape(format!("{} targets for a horizon of {}", y.len(), f.horizon())));
        }
        for (yh, row) in y.iter().zip(&f.values) {
            for (s, q) in self.states.iter_mut().zip(row) {
                s.observe(*yh, *q);
            }
        }
        Ok(())
    }

    /// Resets every triggered level. Returns how many were reset.
    pub fn recalibrate_triggered(&mut self, timestamp: &str) -> usize {
        self.states
            .iter_mut()
            .filter(|s| s.triggered())
            .map(|s| s.recalibrate_on_change(timestamp))
            .filter(|r| *r == Recalibration::Reset)
            .count()
    }

    pub fn change_points(&self) -> usize {
        self.states.iter().map(|s| s.log.len()).sum()
    }

    pub fn is_calibrated(&self) -> bool {
        self.states.iter().all(ConformalState::is_calibrated)
    }
}
