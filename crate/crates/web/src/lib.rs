//! Browser bindings: loss surfaces, the relative density ratio, and the
//! adaptive threshold under a synthetic deviation stream.
//!
//! Every export returns a flat `Vec<f64>` (a `Float64Array` in JS) with a
//! fixed stride, or an empty vector when the arguments are rejected.

use pporpe::surrogate::{check_rpe_epsilon, relative_ratio, rho_ppo, rpe_objective};
use pporpe::threshold::ThresholdState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

/// Values per point returned by [`loss_surface`]: `rho, ppo, ppo_rb, rpe`.
pub const SURFACE_STRIDE: usize = 4;

/// Negative per-sample losses on `n` evenly spaced ratios in `[rho_min, rho_max]`.
#[wasm_bindgen]
pub fn loss_surface(
    epsilon: f64,
    beta: f64,
    eta: f64,
    advantage: f64,
    rho_min: f64,
    rho_max: f64,
    n: usize,
) -> Vec<f64> {
    let valid = n >= 2
        && rho_min > 0.0
        && rho_max > rho_min
        && rho_max.is_finite()
        && advantage.is_finite()
        && advantage != 0.0
        && eta >= 0.0
        && check_rpe_epsilon(beta, epsilon).is_ok();
    if !valid {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(n * SURFACE_STRIDE);
    for i in 0..n {
        let rho = rho_min + (rho_max - rho_min) * i as f64 / (n - 1) as f64;
        out.extend([
            rho,
            rho_ppo(rho, advantage, epsilon, 0.0) * advantage,
            rho_ppo(rho, advantage, epsilon, eta) * advantage,
            rpe_objective(rho, advantage, epsilon, beta),
        ]);
    }
    out
}

/// Pairs `rho, rho_beta` on a log-spaced grid over `[1 / rho_max, rho_max]`.
#[wasm_bindgen]
pub fn relative_ratio_curve(beta: f64, rho_max: f64, n: usize) -> Vec<f64> {
    if n < 2 || !(rho_max > 1.0 && rho_max.is_finite()) || !(0.0..1.0).contains(&beta) {
        return Vec::new();
    }
    let span = rho_max.ln();
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let rho = (span * (2.0 * i as f64 / (n - 1) as f64 - 1.0)).exp();
        match relative_ratio(rho, beta) {
            Ok(rb) => out.extend([rho, rb]),
            Err(_) => return Vec::new(),
        }
    }
    out
}

/// Feeds `steps` batches of `batch` deviations, each uniform on
/// `level * [1 - spread, 1 + spread]`, and records `delta, epsilon` after
/// every update.
#[wasm_bindgen]
pub fn threshold_trace(
    level: f64,
    spread: f64,
    batch: usize,
    steps: usize,
    lambda: f64,
    kappa: f64,
    seed: u64,
) -> Vec<f64> {
    let Ok(mut state) = ThresholdState::new(lambda, kappa, ThresholdState::default().delta_lower)
    else {
        return Vec::new();
    };
    if !(level >= 0.0 && level.is_finite()) || !(0.0..=1.0).contains(&spread) || batch == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut deviations = vec![0.0; batch];
    let mut out = Vec::with_capacity(2 * steps);
    for _ in 0..steps {
        for d in &mut deviations {
            *d = level * (1.0 + spread * rng.random_range(-1.0..=1.0));
        }
        if state.observe(&deviations).is_err() {
            return Vec::new();
        }
        out.extend([state.delta, state.current_epsilon()]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surface_center_equals_advantage() {
        let s = loss_surface(0.2, 0.5, 0.3, -0.7, 0.5, 1.5, 3);
        assert_eq!(s.len(), 3 * SURFACE_STRIDE);
        assert_eq!(&s[4..8], &[1.0, -0.7, -0.7, -0.7]);
    }

    #[test]
    fn surface_rejects_bad_arguments() {
        assert!(loss_surface(0.2, 0.5, 0.3, 0.0, 0.5, 1.5, 3).is_empty());
        assert!(loss_surface(0.2, 0.5, 0.3, 1.0, 1.5, 0.5, 3).is_empty());
        assert!(loss_surface(0.2, 0.95, 0.3, 1.0, 0.5, 1.5, 3).is_empty());
        assert!(loss_surface(0.2, 0.5, -1.0, 1.0, 0.5, 1.5, 3).is_empty());
    }

    #[test]
    fn ratio_curve_is_symmetric() {
        let c = relative_ratio_curve(0.5, 100.0, 11);
        assert_eq!(c.len(), 22);
        for i in 0..11 {
            let j = 10 - i;
            assert!((c[2 * i] * c[2 * j] - 1.0).abs() < 1e-12);
            assert!((c[2 * i + 1] + c[2 * j + 1] - 2.0).abs() < 1e-12);
        }
        assert!(relative_ratio_curve(1.0, 100.0, 11).is_empty());
    }

    #[test]
    fn trace_settles_at_constant_level() {
        let t = threshold_trace(0.3, 0.0, 4, 10_000, 0.999, 0.5, 0);
        let (delta, eps) = (t[t.len() - 2], t[t.len() - 1]);
        assert!((delta - 0.3).abs() < 0.01, "{delta}");
        assert!((eps - 0.15).abs() < 0.005, "{eps}");
        assert!(t.chunks(2).all(|p| (0.05..=0.45).contains(&p[1])));
    }

    #[test]
    fn trace_is_seeded() {
        let a = threshold_trace(0.4, 0.5, 8, 50, 0.99, 0.5, 3);
        assert_eq!(a, threshold_trace(0.4, 0.5, 8, 50, 0.99, 0.5, 3));
        assert_ne!(a, threshold_trace(0.4, 0.5, 8, 50, 0.99, 0.5, 4));
        assert!(threshold_trace(0.4, 0.5, 0, 50, 0.99, 0.5, 3).is_empty());
        assert!(threshold_trace(0.4, 0.5, 8, 50, 1.5, 0.5, 3).is_empty());
    }
}
