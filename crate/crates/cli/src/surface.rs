//! Negative-loss curves of the three surrogates over a grid of density ratios.

use std::io::Write;

use pporpe::surrogate::{
    a_tilde_rpe, check_rpe_epsilon, ppo_slope, relative_ratio, rho_ppo, rpe_objective,
    threshold_ratios,
};

use crate::error::CliError;
use crate::logs::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSpec {
    pub rho_min: f64,
    pub rho_max: f64,
    pub step: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub eta: f64,
    pub advantage: f64,
}

impl Default for SurfaceSpec {
    fn default() -> Self {
        Self {
            rho_min: 0.05,
            rho_max: 3.0,
            step: 1e-3,
            epsilon: 0.2,
            beta: 0.5,
            eta: 0.3,
            advantage: 1.0,
        }
    }
}

/// One grid point (`kind == "grid"`) or a marker at a special abscissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceRow {
    pub kind: &'static str,
    pub rho: f64,
    pub rho_beta: f64,
    pub ppo: f64,
    pub ppo_rb: f64,
    pub rpe: f64,
    pub ppo_slope: f64,
    pub ppo_rb_slope: f64,
    pub rpe_slope: f64,
}

pub const HEADER: [&str; 9] = [
    "kind",
    "rho",
    "rho_beta",
    "ppo",
    "ppo_rb",
    "rpe",
    "ppo_slope",
    "ppo_rb_slope",
    "rpe_slope",
];

const GRID_LIMIT: usize = 10_000_000;

impl SurfaceSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if !(self.rho_min > 0.0 && self.rho_min.is_finite()) {
            return usage(format!("rho-min {} must be positive", self.rho_min));
        }
        if !(self.rho_max > self.rho_min && self.rho_max.is_finite()) {
            return usage(format!("rho-max {} must exceed rho-min", self.rho_max));
        }
        if self.step.is_nan() || self.step <= 0.0 || (self.rho_max - self.rho_min) / self.step > GRID_LIMIT as f64 {
            return usage(format!("step {} gives an empty or oversized grid", self.step));
        }
        if !self.advantage.is_finite() || self.advantage == 0.0 {
            return usage("advantage must be finite and nonzero".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return usage(format!("epsilon {} outside (0, 1)", self.epsilon));
        }
        if self.eta.is_nan() || self.eta < 0.0 {
            return usage(format!("eta {} must be nonnegative", self.eta));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return usage(format!("beta {} outside [0, 1)", self.beta));
        }
        check_rpe_epsilon(self.beta, self.epsilon)?;
        Ok(())
    }

    pub fn row(&self, kind: &'static str, rho: f64) -> Result<SurfaceRow, CliError> {
        let (a, e) = (self.advantage, self.epsilon);
        Ok(SurfaceRow {
            kind,
            rho,
            rho_beta: relative_ratio(rho, self.beta)?,
            ppo: rho_ppo(rho, a, e, 0.0) * a,
            ppo_rb: rho_ppo(rho, a, e, self.eta) * a,
            rpe: rpe_objective(rho, a, e, self.beta),
            ppo_slope: ppo_slope(rho, a, e, 0.0),
            ppo_rb_slope: ppo_slope(rho, a, e, self.eta),
            rpe_slope: a_tilde_rpe(rho, a, e, self.beta),
        })
    }

    /// Grid rows `rho_min + i * step` up to `rho_max`, then marker rows for
    /// the center, the PPO band edges and both RPE threshold ratios.
    pub fn rows(&self) -> Result<Vec<SurfaceRow>, CliError> {
        self.validate()?;
        let n = ((self.rho_max - self.rho_min) / self.step + 1e-9).floor() as usize;
        let mut rows = (0..=n)
            .map(|i| self.row("grid", self.rho_min + i as f64 * self.step))
            .collect::<Result<Vec<_>, _>>()?;
        let (_, rpe_upper) = threshold_ratios(self.epsilon, 1.0, self.beta)?;
        let (_, rpe_lower) = threshold_ratios(self.epsilon, -1.0, self.beta)?;
        for (kind, rho) in [
            ("center", 1.0),
            ("ppo_lower", 1.0 - self.epsilon),
            ("ppo_upper", 1.0 + self.epsilon),
            ("rpe_lower", rpe_lower),
            ("rpe_upper", rpe_upper),
        ] {
            rows.push(self.row(kind, rho)?);
        }
        Ok(rows)
    }
}

pub fn write_rows<W: Write>(out: W, rows: &[SurfaceRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.kind.to_string(),
            fmt_f64(r.rho),
            fmt_f64(r.rho_beta),
            fmt_f64(r.ppo),
            fmt_f64(r.ppo_rb),
            fmt_f64(r.rpe),
            fmt_f64(r.ppo_slope),
            fmt_f64(r.ppo_rb_slope),
            fmt_f64(r.rpe_slope),
        ])?;
    }
    w.flush().map_err(|e| CliError::Csv(e.into()))?;
    Ok(())
}
