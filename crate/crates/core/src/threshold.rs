//! Adaptive threshold for the relative Pearson surrogate.
//!
//! Tracks a decaying maximum of observed `|rho_beta - 1|` and smooths it into
//! an error scale `delta`; the emitted threshold is `kappa * delta` clamped to
//! `[kappa * delta_lower, kappa * (1 - delta_lower)]`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdState {
    /// Smoothed error scale. Starts at the theoretical maximum, 1.
    pub delta: f64,
    /// Recent maximum deviation. Starts at 0 (no information).
    pub delta_max: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub delta_lower: f64,
}

impl Default for ThresholdState {
    fn default() -> Self {
        Self {
            delta: 1.0,
            delta_max: 0.0,
            lambda: 0.999,
            kappa: 0.5,
            delta_lower: 0.1,
        }
    }
}

impl ThresholdState {
    pub fn new(lambda: f64, kappa: f64, delta_lower: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Config(format!("lambda = {lambda} outside (0, 1)")));
        }
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::Config(format!("kappa = {kappa} outside (0, 1)")));
        }
        if !(delta_lower > 0.0 && delta_lower < 0.5) {
            return Err(Error::Config(format!(
                "delta_lower = {delta_lower} outside (0, 0.5)"
            )));
        }
        Ok(Self {
            lambda,
            kappa,
            delta_lower,
            ..Self::default()
        })
    }

    pub fn delta_upper(&self) -> f64 {
        1.0 - self.delta_lower
    }

    /// Smallest and largest epsilon this estimator can emit.
    pub fn epsilon_bounds(&self) -> (f64, f64) {
        (
            self.kappa * self.delta_lower,
            self.kappa * self.delta_upper(),
        )
    }

    /// Threshold from the current error scale, before this step's
    /// observations are folded in.
    pub fn current_epsilon(&self) -> f64 {
        self.kappa * self.delta.min(self.delta_upper()).max(self.delta_lower)
    }

    /// Folds one batch of deviations in: a single decayed-max update using
    /// the batch maximum, then a single smoothing step. Empty input is a no-op.
    pub fn observe(&mut self, deviations: &[f64]) -> Result<()> {
        let Some(batch_max) = batch_max(deviations)? else {
            return Ok(());
        };
        self.update(batch_max);
        Ok(())
    }

    /// Per-sample variant: one decay and one smoothing step per deviation.
    pub fn observe_each(&mut self, deviations: &[f64]) -> Result<()> {
        batch_max(deviations)?;
        for &d in deviations {
            self.update(d);
        }
        Ok(())
    }

    fn update(&mut self, deviation: f64) {
        self.delta_max = (self.lambda * self.delta_max).max(deviation);
        self.delta = self.lambda * self.delta + (1.0 - self.lambda) * self.delta_max;
    }
}

fn batch_max(deviations: &[f64]) -> Result<Option<f64>> {
    let mut max: Option<f64> = None;
    for &d in deviations {
        if d < 0.0 {
            return Err(Error::NegativeDeviation(d));
        }
        if !d.is_finite() {
            return Err(Error::NonFinite("threshold deviation"));
        }
        max = Some(max.map_or(d, |m| m.max(d)));
    }
    Ok(max)
}
