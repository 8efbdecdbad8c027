//! Density-ratio mathematics for the PPO family of surrogate objectives.
//!
//! Every method is expressed as a per-sample *negative loss* `f(rho) * A`
//! style objective evaluated at a density ratio `rho = pi / b`. The policy
//! gradient of a sample is `-w * grad log pi`, where `w` is the derivative of
//! that objective with respect to `log pi`, i.e. `rho * d f / d rho`. All
//! methods share this single gradient path; they differ only in how `w` is
//! computed.
//!
//! The relative Pearson (RPE) objective uses the relative density ratio
//! `rho_beta = rho / (beta * rho + 1 - beta)`, which lies in `[0, 1/beta)`
//! and is symmetric about one for `beta = 0.5`. Its regularization gain `C`
//! is derived from a threshold `epsilon` so that the surrogate's slope
//! vanishes exactly where `rho_beta = 1 + sigma * epsilon`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Surrogate objective selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Clipped ratio (original PPO).
    PpoClip,
    /// Clipped ratio with a negative-slope rollback region.
    PpoRb,
    /// Relative Pearson regularization with a fixed threshold.
    RpeFixed,
    /// Relative Pearson regularization with an adaptive threshold.
    RpeAdaptive,
    /// Plain importance-weighted objective `rho * A` with no proximity term.
    /// Used as the zero-gain ablation; not exposed on the command line.
    Unregularized,
}

impl Method {
    pub const CLI_METHODS: [Method; 4] = [
        Method::PpoClip,
        Method::PpoRb,
        Method::RpeFixed,
        Method::RpeAdaptive,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::PpoClip => "ppo_clip",
            Method::PpoRb => "ppo_rb",
            Method::RpeFixed => "rpe_fixed",
            Method::RpeAdaptive => "rpe_adaptive",
            Method::Unregularized => "unregularized",
        }
    }

    pub fn is_rpe(self) -> bool {
        matches!(self, Method::RpeFixed | Method::RpeAdaptive)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ppo_clip" => Ok(Method::PpoClip),
            "ppo_rb" => Ok(Method::PpoRb),
            "rpe_fixed" => Ok(Method::RpeFixed),
            "rpe_adaptive" => Ok(Method::RpeAdaptive),
            "unregularized" => Ok(Method::Unregularized),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

/// Method selector plus its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateConfig {
    pub method: Method,
    /// Mixture ratio of the relative density ratio.
    pub beta: f64,
    /// Threshold for the fixed-threshold methods.
    pub epsilon: f64,
    /// Rollback strength, `ppo_rb` only.
    pub eta: f64,
    /// `|log pi - log b|` is clamped to this before exponentiation.
    pub log_ratio_clamp: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            method: Method::RpeAdaptive,
            beta: 0.5,
            epsilon: 0.2,
            eta: 0.3,
            log_ratio_clamp: 20.0,
        }
    }
}

pub const BETA_MIN: f64 = 0.1;
pub const BETA_MAX: f64 = 0.9;

impl SurrogateConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    /// Range checks. For `rpe_fixed` the gain denominator is also checked at
    /// the configured epsilon; `rpe_adaptive` callers must additionally run
    /// [`check_rpe_epsilon`] at the largest epsilon their threshold emits.
    pub fn validate(&self) -> Result<()> {
        if !(BETA_MIN..=BETA_MAX).contains(&self.beta) {
            return Err(Error::Config(format!(
                "beta = {} outside [{BETA_MIN}, {BETA_MAX}]",
                self.beta
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!(
                "epsilon = {} outside (0, 1)",
                self.epsilon
            )));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta = {} must be >= 0", self.eta)));
        }
        if !(self.log_ratio_clamp > 0.0 && self.log_ratio_clamp.is_finite()) {
            return Err(Error::Config("log-ratio clamp must be positive".into()));
        }
        if self.method == Method::RpeFixed {
            check_rpe_epsilon(self.beta, self.epsilon)?;
        }
        Ok(())
    }
}

/// Checks that both the threshold-ratio denominator `1 - beta (1 + sigma eps)`
/// and the gain denominator are positive for `sigma = +1` and `-1`.
///
/// Both expressions are monotone in `eps`, so checking the largest epsilon a
/// run can use covers every smaller one.
pub fn check_rpe_epsilon(beta: f64, epsilon: f64) -> Result<()> {
    for sigma in [1.0, -1.0] {
        let ratio_den = 1.0 - beta * (1.0 + sigma * epsilon);
        let gain_den = gain_denominator(epsilon, sigma, beta);
        if !(ratio_den > 0.0 && gain_den > 0.0) {
            return Err(Error::Config(format!(
                "beta = {beta} with epsilon = {epsilon} gives a non-positive gain \
                 denominator (sigma = {sigma:+})"
            )));
        }
    }
    Ok(())
}

/// Sign of the advantage; zero maps to `+1`.
#[inline]
pub fn sign(advantage: f64) -> f64 {
    if advantage >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `rho = exp(clamp(log_pi - log_b))`.
#[inline]
pub fn density_ratio(log_pi: f64, log_b: f64, clamp: f64) -> f64 {
    (log_pi - log_b).clamp(-clamp, clamp).exp()
}

/// `rho_beta = rho / (beta * rho + 1 - beta)`.
pub fn relative_ratio(rho: f64, beta: f64) -> Result<f64> {
    let den = 1.0 + beta * (rho - 1.0);
    if den == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(rho / den)
}

/// Threshold coordinates `(rho_beta^eps, rho^eps)` where the RPE surrogate
/// peaks: `rho_beta^eps = 1 + sigma eps` and its preimage in the raw ratio.
pub fn threshold_ratios(epsilon: f64, sigma: f64, beta: f64) -> Result<(f64, f64)> {
    let den = 1.0 - beta * (1.0 + sigma * epsilon);
    if den <= 0.0 {
        return Err(Error::Config(format!(
            "threshold ratio undefined: 1 - beta (1 + sigma eps) = {den}"
        )));
    }
    Ok((1.0 + sigma * epsilon, 1.0 + sigma * epsilon / den))
}

#[inline]
fn gain_denominator(epsilon: f64, sigma: f64, beta: f64) -> f64 {
    beta * sigma * epsilon * epsilon + 2.0 * epsilon * (1.0 - beta * (1.0 + sigma * epsilon))
}

/// Regularization gain `C = |A| / (beta sigma eps^2 + 2 eps (1 - beta (1 + sigma eps)))`.
pub fn gain(advantage: f64, epsilon: f64, beta: f64) -> Result<f64> {
    let den = gain_denominator(epsilon, sign(advantage), beta);
    if den <= 0.0 {
        return Err(Error::Config(format!(
            "gain denominator {den} is not positive (beta = {beta}, eps = {epsilon})"
        )));
    }
    Ok(advantage.abs() / den)
}

#[inline]
fn gain_unchecked(advantage: f64, epsilon: f64, beta: f64) -> f64 {
    advantage.abs() / gain_denominator(epsilon, sign(advantage), beta)
}

/// Regularized advantage `A - C (1 - beta + beta rho) (rho_beta - 1)^2 / rho`.
/// Requires `rho > 0`.
pub fn rpe_advantage(rho: f64, advantage: f64, epsilon: f64, beta: f64) -> f64 {
    rpe_objective(rho, advantage, epsilon, beta) / rho
}

/// Negative per-sample loss `rho * A^RPE = rho A - C (1 - beta + beta rho) (rho_beta - 1)^2`.
pub fn rpe_objective(rho: f64, advantage: f64, epsilon: f64, beta: f64) -> f64 {
    let c = gain_unchecked(advantage, epsilon, beta);
    let mix = 1.0 + beta * (rho - 1.0);
    let dev = rho / mix - 1.0;
    rho * advantage - c * mix * dev * dev
}

/// `d(rho * A^RPE) / d rho`, the effective advantage of the RPE surrogate:
/// `A - C (rho_beta - 1) (beta (rho_beta - 1) + 2 (1 - beta) rho_beta / rho)`.
///
/// `rho_beta / rho` is evaluated as `1 / (1 - beta + beta rho)`, so `rho = 0`
/// is well defined.
pub fn a_tilde_rpe(rho: f64, advantage: f64, epsilon: f64, beta: f64) -> f64 {
    let c = gain_unchecked(advantage, epsilon, beta);
    let mix = 1.0 + beta * (rho - 1.0);
    let dev = rho / mix - 1.0;
    advantage - c * dev * (beta * dev + 2.0 * (1.0 - beta) / mix)
}

#[inline]
fn outside_trust_region(rho: f64, advantage: f64, epsilon: f64) -> bool {
    sign(advantage) * (rho - 1.0) >= epsilon
}

/// Clipped (or rolled-back when `eta > 0`) ratio of PPO / PPO-RB.
pub fn rho_ppo(rho: f64, advantage: f64, epsilon: f64, eta: f64) -> f64 {
    if outside_trust_region(rho, advantage, epsilon) {
        -eta * rho + (1.0 + eta) * (1.0 + sign(advantage) * epsilon)
    } else {
        rho
    }
}

/// Implicit PPO regularizer: `A (1 + eta) (1 - (1 + sigma eps) / rho)` outside
/// the trust region, zero inside. Requires `rho > 0`.
pub fn omega_ppo(rho: f64, advantage: f64, epsilon: f64, eta: f64) -> f64 {
    if outside_trust_region(rho, advantage, epsilon) {
        advantage * (1.0 + eta) * (1.0 - (1.0 + sign(advantage) * epsilon) / rho)
    } else {
        0.0
    }
}

/// `d(rho_ppo * A) / d rho`: `A` inside the region, `-eta A` outside.
pub fn ppo_slope(rho: f64, advantage: f64, epsilon: f64, eta: f64) -> f64 {
    if outside_trust_region(rho, advantage, epsilon) {
        -eta * advantage
    } else {
        advantage
    }
}

/// One replayed sample seen through the density ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioPoint {
    pub rho: f64,
    pub rho_beta: f64,
    pub advantage: f64,
    pub sigma: f64,
}

impl RatioPoint {
    pub fn new(rho: f64, advantage: f64, beta: f64) -> Result<Self> {
        Ok(Self {
            rho,
            rho_beta: relative_ratio(rho, beta)?,
            advantage,
            sigma: sign(advantage),
        })
    }

    pub fn from_log_densities(
        log_pi: f64,
        log_b: f64,
        advantage: f64,
        config: &SurrogateConfig,
    ) -> Result<Self> {
        Self::new(
            density_ratio(log_pi, log_b, config.log_ratio_clamp),
            advantage,
            config.beta,
        )
    }
}

/// Per-sample negative loss of the configured method. `epsilon_now` is the
/// adaptive threshold for `rpe_adaptive` and ignored by the other methods,
/// which use `config.epsilon`.
pub fn surrogate_objective(point: &RatioPoint, config: &SurrogateConfig, epsilon_now: f64) -> f64 {
    let (rho, a) = (point.rho, point.advantage);
    match config.method {
        Method::PpoClip => rho_ppo(rho, a, config.epsilon, 0.0) * a,
        Method::PpoRb => rho_ppo(rho, a, config.epsilon, config.eta) * a,
        Method::RpeFixed => rpe_objective(rho, a, config.epsilon, config.beta),
        Method::RpeAdaptive => rpe_objective(rho, a, epsilon_now, config.beta),
        Method::Unregularized => rho * a,
    }
}

/// Scalar `w` such that the sample's loss gradient is `-w * grad log pi`.
///
/// `w = rho * d(objective)/d rho`, the exact derivative of the negative
/// per-sample loss with respect to `log pi`. The advantage is a constant.
pub fn surrogate_coefficient(
    point: &RatioPoint,
    config: &SurrogateConfig,
    epsilon_now: f64,
) -> Result<f64> {
    let (rho, a) = (point.rho, point.advantage);
    let slope = match config.method {
        Method::PpoClip => ppo_slope(rho, a, config.epsilon, 0.0),
        Method::PpoRb => ppo_slope(rho, a, config.epsilon, config.eta),
        Method::RpeFixed => a_tilde_rpe(rho, a, config.epsilon, config.beta),
        Method::RpeAdaptive => {
            if !(epsilon_now > 0.0 && epsilon_now < 1.0) {
                return Err(Error::Config(format!(
                    "adaptive epsilon {epsilon_now} outside (0, 1)"
                )));
            }
            a_tilde_rpe(rho, a, epsilon_now, config.beta)
        }
        Method::Unregularized => a,
    };
    Ok(rho * slope)
}

/// Sample estimate of the Pearson divergence `E_b[(rho - 1)^2 / 2]` from
/// density ratios drawn under the baseline policy.
pub fn pearson_divergence_estimate(ratios: &[f64]) -> Result<f64> {
    if ratios.is_empty() {
        return Err(Error::Empty("pearson_divergence_estimate"));
    }
    let sum: f64 = ratios.iter().map(|r| 0.5 * (r - 1.0) * (r - 1.0)).sum();
    Ok(sum / ratios.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn density_ratio_cases() {
        assert_eq!(density_ratio(-1.3, -1.3, 20.0), 1.0);
        assert!(close(density_ratio(2f64.ln(), 0.0, 20.0), 2.0, 1e-15));
        assert_eq!(density_ratio(50.0, 0.0, 20.0), 20f64.exp());
        assert_eq!(density_ratio(0.0, 50.0, 20.0), (-20f64).exp());
    }

    #[test]
    fn relative_ratio_cases() {
        for beta in [0.0, 0.1, 0.5, 0.9, 1.0] {
            assert_eq!(relative_ratio(1.0, beta).unwrap(), 1.0);
        }
        assert!(close(relative_ratio(2.0, 0.5).unwrap(), 4.0 / 3.0, 1e-15));
        assert!(close(relative_ratio(0.5, 0.5).unwrap(), 2.0 / 3.0, 1e-15));
        assert_eq!(relative_ratio(3.7, 0.0).unwrap(), 3.7);
        assert_eq!(relative_ratio(0.0, 1.0), Err(Error::UndefinedRatio));
    }

    #[test]
    fn threshold_ratio_cases() {
        let (rb, r) = threshold_ratios(0.2, 1.0, 0.0).unwrap();
        assert!(close(rb, 1.2, 1e-15) && close(r, 1.2, 1e-15));
        let (rb, r) = threshold_ratios(0.1, 1.0, 0.5).unwrap();
        assert!(close(rb, 1.1, 1e-15) && close(r, 1.0 + 0.1 / 0.45, 1e-15));
        assert!(close(r, 1.22222, 1e-5));
        let (rb, r) = threshold_ratios(0.1, -1.0, 0.5).unwrap();
        assert!(close(rb, 0.9, 1e-15) && close(r, 1.0 - 0.1 / 0.55, 1e-15));
        assert!(close(r, 0.81818, 1e-5));
        assert!(threshold_ratios(0.45, 1.0, 0.9).is_err());
    }

    #[test]
    fn threshold_ratio_maps_back_through_relative_ratio() {
        for beta in [0.1, 0.3, 0.5, 0.7] {
            for eps in [0.05, 0.1, 0.3] {
                for sigma in [1.0, -1.0] {
                    let (rb, r) = threshold_ratios(eps, sigma, beta).unwrap();
                    assert!(close(relative_ratio(r, beta).unwrap(), rb, 1e-12));
                }
            }
        }
    }

    #[test]
    fn gain_cases() {
        assert_eq!(gain(0.0, 0.1, 0.5).unwrap(), 0.0);
        assert!(close(gain(1.0, 0.1, 0.5).unwrap(), 1.0 / 0.095, 1e-12));
        assert!(close(gain(1.0, 0.1, 0.5).unwrap(), 10.52632, 1e-5));
        assert!(close(gain(-1.0, 0.1, 0.5).unwrap(), 1.0 / 0.105, 1e-12));
        assert!(close(gain(-1.0, 0.1, 0.5).unwrap(), 9.52381, 1e-5));
        assert!(gain(1.0, 0.45, 0.95).is_err());
    }

    #[test]
    fn a_tilde_rpe_cases() {
        for (a, eps, beta) in [(1.0, 0.1, 0.5), (-0.3, 0.4, 0.2), (2.5, 0.2, 0.8)] {
            assert!(close(a_tilde_rpe(1.0, a, eps, beta), a, 1e-15));
        }
        let (_, r_eps) = threshold_ratios(0.1, 1.0, 0.5).unwrap();
        assert!(a_tilde_rpe(r_eps, 1.0, 0.1, 0.5).abs() < 1e-9);
        // frozen from a central difference of rho * A^RPE at h = 1e-6
        assert!(close(a_tilde_rpe(1.1, 1.0, 0.1, 0.5), 0.5106814653, 1e-8));
    }

    #[test]
    fn rho_ppo_cases() {
        assert_eq!(rho_ppo(1.0, 1.0, 0.2, 0.7), 1.0);
        assert!(close(rho_ppo(1.5, 1.0, 0.2, 0.0), 1.2, 1e-15));
        assert!(close(rho_ppo(1.5, 1.0, 0.2, 0.3), 1.11, 1e-12));
        // negative advantage clips on the low side
        assert!(close(rho_ppo(0.5, -1.0, 0.2, 0.0), 0.8, 1e-15));
        assert_eq!(rho_ppo(1.5, -1.0, 0.2, 0.0), 1.5);
    }

    #[test]
    fn rho_ppo_is_continuous_at_threshold() {
        for eta in [0.0, 0.3, 1.0] {
            for (a, eps) in [(1.0, 0.2), (-1.0, 0.2), (0.5, 0.1)] {
                let edge = 1.0 + sign(a) * eps;
                let below = rho_ppo(edge - sign(a) * 1e-12, a, eps, eta);
                assert!(close(below, rho_ppo(edge, a, eps, eta), 1e-9));
            }
        }
    }

    #[test]
    fn omega_ppo_cases() {
        assert_eq!(omega_ppo(1.1, 1.0, 0.2, 0.0), 0.0);
        let w = omega_ppo(1.5, 1.0, 0.2, 0.0);
        assert!(close(w, 0.2, 1e-15));
        assert!(close(1.5 * (1.0 - w), 1.2, 1e-15));
        for a in [1.0, -1.0] {
            let edge = 1.0 + sign(a) * 0.2;
            assert!(omega_ppo(edge, a, 0.2, 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn coefficient_at_center_is_advantage_for_every_method() {
        for method in [
            Method::PpoClip,
            Method::PpoRb,
            Method::RpeFixed,
            Method::RpeAdaptive,
            Method::Unregularized,
        ] {
            let cfg = SurrogateConfig::new(method);
            for a in [1.0, -0.7, 0.0, 3.0] {
                let p = RatioPoint::new(1.0, a, cfg.beta).unwrap();
                assert_eq!(surrogate_coefficient(&p, &cfg, 0.3).unwrap(), a);
                assert_eq!(surrogate_objective(&p, &cfg, 0.3), a);
            }
        }
    }

    #[test]
    fn clipped_coefficient_is_zero() {
        let cfg = SurrogateConfig {
            epsilon: 0.2,
            ..SurrogateConfig::new(Method::PpoClip)
        };
        let p = RatioPoint::new(1.5, 1.0, cfg.beta).unwrap();
        assert_eq!(surrogate_coefficient(&p, &cfg, 0.2).unwrap(), 0.0);
        // finite difference of the objective in log pi agrees
        let h = 1e-6;
        let obj = |log_rho: f64| {
            let q = RatioPoint::new(log_rho.exp(), 1.0, cfg.beta).unwrap();
            surrogate_objective(&q, &cfg, 0.2)
        };
        let fd = (obj(1.5f64.ln() + h) - obj(1.5f64.ln() - h)) / (2.0 * h);
        assert!(fd.abs() < 1e-9);
    }

    #[test]
    fn rollback_coefficient_is_negative_slope() {
        let cfg = SurrogateConfig {
            epsilon: 0.2,
            eta: 0.3,
            ..SurrogateConfig::new(Method::PpoRb)
        };
        let p = RatioPoint::new(1.5, 1.0, cfg.beta).unwrap();
        assert!(close(surrogate_coefficient(&p, &cfg, 0.2).unwrap(), -0.45, 1e-15));
    }

    #[test]
    fn rpe_fixed_coefficient_vanishes_at_threshold() {
        let cfg = SurrogateConfig {
            epsilon: 0.1,
            ..SurrogateConfig::new(Method::RpeFixed)
        };
        let (_, r_eps) = threshold_ratios(0.1, 1.0, 0.5).unwrap();
        let p = RatioPoint::new(r_eps, 1.0, 0.5).unwrap();
        assert!(surrogate_coefficient(&p, &cfg, 0.1).unwrap().abs() < 1e-9);
    }

    #[test]
    fn coefficient_is_log_pi_derivative_of_objective() {
        let h = 1e-6;
        for method in [Method::PpoRb, Method::RpeFixed, Method::RpeAdaptive] {
            let cfg = SurrogateConfig::new(method);
            for (rho, a) in [(0.6, 1.0), (1.05, -0.8), (1.7, 0.4), (0.9, -1.5)] {
                let obj = |lr: f64| {
                    let q = RatioPoint::new(lr.exp(), a, cfg.beta).unwrap();
                    surrogate_objective(&q, &cfg, 0.25)
                };
                let fd = (obj(f64::ln(rho) + h) - obj(f64::ln(rho) - h)) / (2.0 * h);
                let p = RatioPoint::new(rho, a, cfg.beta).unwrap();
                let w = surrogate_coefficient(&p, &cfg, 0.25).unwrap();
                assert!(close(w, fd, 1e-6), "{method} rho {rho}: {w} vs {fd}");
            }
        }
    }

    #[test]
    fn pearson_divergence_cases() {
        assert_eq!(pearson_divergence_estimate(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!(close(pearson_divergence_estimate(&[0.5, 1.5]).unwrap(), 0.125, 1e-15));
        assert_eq!(pearson_divergence_estimate(&[2.0]).unwrap(), 0.5);
        assert!(pearson_divergence_estimate(&[]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SurrogateConfig::default().validate().is_ok());
        let bad_beta = SurrogateConfig {
            beta: 0.95,
            ..SurrogateConfig::default()
        };
        assert!(bad_beta.validate().is_err());
        assert!(check_rpe_epsilon(0.95, 0.45).is_err());
        assert!(check_rpe_epsilon(0.5, 0.45).is_ok());
        // 1 - 0.9 * 1.45 < 0
        assert!(check_rpe_epsilon(0.9, 0.45).is_err());
        assert!("ppos".parse::<Method>().is_err());
        for m in Method::CLI_METHODS {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn numerical_a_tilde(rho: f64, a: f64, eps: f64, beta: f64) -> f64 {
            // independent restatement of rho * A^RPE, differentiated numerically
            let c = a.abs() / (beta * sign(a) * eps * eps + 2.0 * eps * (1.0 - beta * (1.0 + sign(a) * eps)));
            let f = |r: f64| {
                let rb = r / (beta * r + 1.0 - beta);
                let omega = c * (rb - 1.0) * (rb - 1.0) / rb;
                r * (a - omega)
            };
            let h = 1e-6;
            (f(rho + h) - f(rho - h)) / (2.0 * h)
        }

        proptest! {
            #[test]
            fn symmetry_at_half(log_rho in -7.0f64..7.0) {
                let rho = log_rho.exp();
                let s = relative_ratio(rho, 0.5).unwrap() + relative_ratio(1.0 / rho, 0.5).unwrap();
                prop_assert!((s - 2.0).abs() < 1e-12);
            }

            #[test]
            fn relative_ratio_range(log_rho in -20.0f64..20.0, beta in 0.01f64..1.0) {
                let rb = relative_ratio(log_rho.exp(), beta).unwrap();
                prop_assert!(rb >= 0.0 && rb < 1.0 / beta);
            }

            #[test]
            fn a_tilde_matches_finite_difference(
                rho in 0.05f64..5.0,
                beta in prop::sample::select(vec![0.3, 0.5, 0.7]),
                eps in prop::sample::select(vec![0.1, 0.3]),
                a in prop::sample::select(vec![1.0, -1.0, 0.5, -0.5]),
            ) {
                let an = a_tilde_rpe(rho, a, eps, beta);
                let fd = numerical_a_tilde(rho, a, eps, beta);
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1.0);
                prop_assert!(rel < 1e-6, "{} vs {}", an, fd);
            }

            #[test]
            fn appendix_identity(rho in 1e-3f64..5.0, a in -3.0f64..3.0, eps in 0.01f64..0.9, eta in 0.0f64..2.0) {
                let lhs = rho * (a - omega_ppo(rho, a, eps, eta));
                let rhs = rho_ppo(rho, a, eps, eta) * a;
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            }

            #[test]
            fn positive_advantage_sign_structure(
                beta in prop::sample::select(vec![0.3, 0.5, 0.7]),
                eps in prop::sample::select(vec![0.1, 0.3]),
                t in 0.0f64..1.0,
            ) {
                let (_, hi) = threshold_ratios(eps, 1.0, beta).unwrap();
                let inside = 1e-3 + t * (hi - 2e-3);
                prop_assert!(a_tilde_rpe(inside, 1.0, eps, beta) > 0.0);
                let beyond = hi + 1e-3 + 4.0 * t;
                prop_assert!(a_tilde_rpe(beyond, 1.0, eps, beta) < 0.0);
            }
        }
    }
}
