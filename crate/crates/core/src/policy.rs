//! Diagonal-Gaussian policy over continuous actions.
//!
//! The actor network emits `2 * d_a` values: the first `d_a` are the mean and
//! the last `d_a` the log standard deviation, clamped to
//! `[LOG_SCALE_MIN, LOG_SCALE_MAX]`. For a raw log-scale outside the band only
//! cotangents whose descent step points back into the band are kept, so a
//! saturated output can always recover.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::net::{Activation, GradBuffer, Mlp, Trace};

pub const LOG_SCALE_MIN: f64 = -5.0;
pub const LOG_SCALE_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianHead {
    pub mean: Vec<f64>,
    pub log_scale: Vec<f64>,
}

impl GaussianHead {
    /// Splits a raw network output into mean and clamped log-scale.
    pub fn from_raw(raw: &[f64]) -> Result<Self> {
        if !raw.len().is_multiple_of(2) || raw.is_empty() {
            return Err(Error::Dimension {
                context: "GaussianHead::from_raw (output must be 2 * d_a)",
                expected: raw.len() + 1,
                actual: raw.len(),
            });
        }
        let d = raw.len() / 2;
        Ok(Self {
            mean: raw[..d].to_vec(),
            log_scale: raw[d..]
                .iter()
                .map(|v| v.clamp(LOG_SCALE_MIN, LOG_SCALE_MAX))
                .collect(),
        })
    }

    pub fn action_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn scale(&self) -> Vec<f64> {
        self.log_scale.iter().map(|l| l.exp()).collect()
    }

    /// Exact log-density of `action`.
    pub fn log_prob(&self, action: &[f64]) -> f64 {
        debug_assert_eq!(action.len(), self.action_dim());
        self.mean
            .iter()
            .zip(&self.log_scale)
            .zip(action)
            .map(|((&m, &ls), &a)| {
                let z = (a - m) * (-ls).exp();
                -0.5 * z * z - ls - HALF_LN_2PI
            })
            .sum()
    }

    /// Differential entropy.
    pub fn entropy(&self) -> f64 {
        self.log_scale
            .iter()
            .map(|ls| ls + 0.5 + HALF_LN_2PI)
            .sum()
    }

    /// `mean + scale * z` with `z` standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.log_scale)
            .map(|(&m, &ls)| {
                let z: f64 = rng.sample(StandardNormal);
                m + ls.exp() * z
            })
            .collect()
    }

    /// `(d log pi / d mean, d log pi / d log_scale)` at `action`.
    pub fn log_prob_gradients(&self, action: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut d_mean = Vec::with_capacity(self.action_dim());
        let mut d_log_scale = Vec::with_capacity(self.action_dim());
        for ((&m, &ls), &a) in self.mean.iter().zip(&self.log_scale).zip(action) {
            let inv_var = (-2.0 * ls).exp();
            let diff = a - m;
            d_mean.push(diff * inv_var);
            d_log_scale.push(diff * diff * inv_var - 1.0);
        }
        (d_mean, d_log_scale)
    }
}

/// Gaussian head built from the actor's raw output.
pub fn head(net: &Mlp, state: &[f64]) -> Result<GaussianHead> {
    GaussianHead::from_raw(&net.forward(state)?)
}

/// A head together with the forward trace needed to backpropagate into it.
#[derive(Debug, Clone)]
pub struct TracedHead {
    pub head: GaussianHead,
    trace: Trace,
}

impl TracedHead {
    pub fn new(net: &Mlp, state: &[f64]) -> Result<Self> {
        let trace = net.forward_trace(state)?;
        Ok(Self {
            head: GaussianHead::from_raw(trace.output())?,
            trace,
        })
    }

    /// Chains head cotangents into the network parameters. For log-scale
    /// outputs outside the clamp band, cotangents that would push further out
    /// are dropped and the rest pass straight through.
    pub fn backward(
        &self,
        net: &Mlp,
        d_mean: &[f64],
        d_log_scale: &[f64],
        grads: &mut GradBuffer,
    ) -> Result<()> {
        let d = self.head.action_dim();
        check_dim("TracedHead::backward mean cotangent", d, d_mean.len())?;
        check_dim("TracedHead::backward scale cotangent", d, d_log_scale.len())?;
        let raw = self.trace.output();
        let mut cot = Vec::with_capacity(2 * d);
        cot.extend_from_slice(d_mean);
        cot.extend(d_log_scale.iter().zip(&raw[d..]).map(|(&g, &r)| {
            // descent moves the raw output along -g
            let outward = (r > LOG_SCALE_MAX && g < 0.0) || (r < LOG_SCALE_MIN && g > 0.0);
            if outward {
                0.0
            } else {
                g
            }
        }));
        net.backward_trace(&self.trace, &cot, grads)
    }
}

/// Accumulates `coefficient * grad_theta log pi(action | state)` into `grads`.
pub fn score_backward(
    net: &Mlp,
    state: &[f64],
    action: &[f64],
    coefficient: f64,
    grads: &mut GradBuffer,
) -> Result<()> {
    if !coefficient.is_finite() {
        return Err(Error::NonFinite("score coefficient"));
    }
    let traced = TracedHead::new(net, state)?;
    check_dim("score_backward action", traced.head.action_dim(), action.len())?;
    if coefficient == 0.0 {
        return Ok(());
    }
    let (mut d_mean, mut d_log_scale) = traced.head.log_prob_gradients(action);
    d_mean.iter_mut().for_each(|g| *g *= coefficient);
    d_log_scale.iter_mut().for_each(|g| *g *= coefficient);
    traced.backward(net, &d_mean, &d_log_scale, grads)
}

/// Latest policy and its slowly tracking baseline copy.
#[derive(Debug, Clone)]
pub struct PolicyPair {
    pub actor: Mlp,
    pub baseline: Mlp,
    pub polyak_rate: f64,
}

impl PolicyPair {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        activation: Activation,
        polyak_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(polyak_rate > 0.0 && polyak_rate <= 1.0) {
            return Err(Error::Config(format!(
                "baseline polyak rate {polyak_rate} outside (0, 1]"
            )));
        }
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * action_dim);
        let actor = Mlp::new(&sizes, activation, rng)?;
        Ok(Self {
            baseline: actor.clone(),
            actor,
            polyak_rate,
        })
    }

    /// `baseline <- (1 - tau) baseline + tau actor`.
    pub fn update_baseline(&mut self) -> Result<()> {
        self.baseline.soft_update_from(&self.actor, self.polyak_rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn half_ln_two_pi() -> f64 {
        0.5 * (2.0 * std::f64::consts::PI).ln()
    }

    fn gh(mean: &[f64], log_scale: &[f64]) -> GaussianHead {
        GaussianHead {
            mean: mean.to_vec(),
            log_scale: log_scale.to_vec(),
        }
    }

    #[test]
    fn half_ln_two_pi_constant() {
        assert!((HALF_LN_2PI - half_ln_two_pi()).abs() < 1e-15);
    }

    #[test]
    fn head_from_zero_net() {
        let net = Mlp::zeros(&[3, 4, 2], Activation::Swish).unwrap();
        let h = head(&net, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(h.mean, vec![0.0]);
        assert_eq!(h.log_scale, vec![0.0]);
        assert_eq!(h.scale(), vec![1.0]);
    }

    #[test]
    fn head_slicing_and_clamp() {
        let h = GaussianHead::from_raw(&[0.3, -1.2]).unwrap();
        assert_eq!(h, gh(&[0.3], &[-1.2]));
        let h = GaussianHead::from_raw(&[0.0, 10.0]).unwrap();
        assert_eq!(h.log_scale, vec![2.0]);
        let h = GaussianHead::from_raw(&[0.0, -10.0]).unwrap();
        assert_eq!(h.log_scale, vec![-5.0]);
        assert!(GaussianHead::from_raw(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn saturated_scale_passes_only_inward_cotangents() {
        // single bias layer: raw output equals the biases
        let mut net = Mlp::zeros(&[1, 2], Activation::Tanh).unwrap();
        let grad_for = |net: &Mlp, g: f64| {
            let traced = TracedHead::new(net, &[0.0]).unwrap();
            let mut grads = net.new_grad_buffer();
            traced.backward(net, &[0.0], &[g], &mut grads).unwrap();
            grads.as_slice()[3]
        };
        net.params_mut()[3] = 4.0;
        assert_eq!(grad_for(&net, -1.0), 0.0);
        assert_eq!(grad_for(&net, 1.0), 1.0);
        net.params_mut()[3] = -7.0;
        assert_eq!(grad_for(&net, 1.0), 0.0);
        assert_eq!(grad_for(&net, -1.0), -1.0);
        net.params_mut()[3] = 0.5;
        assert_eq!(grad_for(&net, -1.0), -1.0);
    }

    #[test]
    fn log_prob_cases() {
        let h = gh(&[0.0], &[0.0]);
        assert!((h.log_prob(&[0.0]) + 0.918_938_5).abs() < 1e-7);
        let h = gh(&[0.5, -1.0], &[0.3, -0.7]);
        let expected = -(0.3 - 0.7) - 2.0 * half_ln_two_pi();
        assert!((h.log_prob(&[0.5, -1.0]) - expected).abs() < 1e-14);
        let shifted = gh(&[2.5, 1.0], &[0.3, -0.7]);
        assert!((h.log_prob(&[0.1, 0.2]) - shifted.log_prob(&[2.1, 2.2])).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_reproducible() {
        let h = gh(&[0.1, 0.2], &[0.0, -1.0]);
        let a = h.sample(&mut ChaCha8Rng::seed_from_u64(3));
        let b = h.sample(&mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }

    #[test]
    fn narrow_head_samples_near_mean() {
        let h = gh(&[0.7], &[LOG_SCALE_MIN]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // scale e^-5 ~ 0.0067, so 0.05 is more than 7 sigma
        for _ in 0..10_000 {
            assert!((h.sample(&mut rng)[0] - 0.7).abs() < 0.05);
        }
    }

    #[test]
    fn sample_mean_matches() {
        let h = gh(&[0.5], &[0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let m: f64 = (0..n).map(|_| h.sample(&mut rng)[0]).sum::<f64>() / n as f64;
        // CLT: sd of the mean is 1 / sqrt(1e5) ~ 0.0032
        assert!((m - 0.5).abs() < 0.02);
    }

    #[test]
    fn density_integrates_to_one() {
        // importance sampling from a wider proposal N(0, 3^2)
        let target = gh(&[0.4], &[-0.3]);
        let proposal = gh(&[0.0], &[3f64.ln()]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let total: f64 = (0..n)
            .map(|_| {
                let a = proposal.sample(&mut rng);
                (target.log_prob(&a) - proposal.log_prob(&a)).exp()
            })
            .sum();
        assert!((total / n as f64 - 1.0).abs() < 0.02);
    }

    #[test]
    fn ratio_has_unit_mean_under_baseline() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let pi = gh(&[rng.random_range(-0.5..0.5)], &[rng.random_range(-0.5..0.3)]);
            let b = gh(&[rng.random_range(-0.5..0.5)], &[rng.random_range(-0.1..0.5)]);
            let n = 100_000;
            let mean: f64 = (0..n)
                .map(|_| {
                    let a = b.sample(&mut rng);
                    (pi.log_prob(&a) - b.log_prob(&a)).exp()
                })
                .sum::<f64>()
                / n as f64;
            assert!((mean - 1.0).abs() < 0.02, "{pi:?} {b:?}: {mean}");
        }
    }

    fn random_actor(seed: u64) -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Mlp::new(&[3, 6, 4], Activation::Swish, &mut rng).unwrap();
        for p in net.params_mut() {
            *p += rng.random_range(-0.2..0.2);
        }
        net
    }

    fn fd_log_prob(net: &Mlp, s: &[f64], a: &[f64], i: usize, h: f64) -> f64 {
        let mut p = net.clone();
        p.params_mut()[i] += h;
        let mut m = net.clone();
        m.params_mut()[i] -= h;
        (head(&p, s).unwrap().log_prob(a) - head(&m, s).unwrap().log_prob(a)) / (2.0 * h)
    }

    #[test]
    fn score_matches_finite_differences() {
        for seed in 0..5 {
            let net = random_actor(seed);
            let s = [0.3, -0.4, 0.9];
            let a = [0.25, -0.6];
            let mut g = net.new_grad_buffer();
            score_backward(&net, &s, &a, 1.0, &mut g).unwrap();
            for i in 0..net.parameter_count() {
                let fd = fd_log_prob(&net, &s, &a, i, 1e-5);
                let an = g.as_slice()[i];
                let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-3);
                assert!(rel < 1e-6, "seed {seed} param {i}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn score_is_linear_and_zero_safe() {
        let net = random_actor(2);
        let (s, a) = ([0.1, 0.2, 0.3], [0.0, 1.0]);
        let mut zero = net.new_grad_buffer();
        score_backward(&net, &s, &a, 0.0, &mut zero).unwrap();
        assert!(zero.as_slice().iter().all(|&g| g == 0.0));
        let mut one = net.new_grad_buffer();
        score_backward(&net, &s, &a, 1.0, &mut one).unwrap();
        let mut two = net.new_grad_buffer();
        score_backward(&net, &s, &a, 2.0, &mut two).unwrap();
        for (x, y) in one.as_slice().iter().zip(two.as_slice()) {
            assert_eq!(2.0 * x, *y);
        }
        assert!(score_backward(&net, &s, &a, f64::INFINITY, &mut one).is_err());
    }

    #[test]
    fn baseline_updates() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut pair = PolicyPair::new(2, 1, &[4], Activation::Tanh, 1.0, &mut rng).unwrap();
        pair.actor.params_mut()[0] += 1.0;
        pair.update_baseline().unwrap();
        assert_eq!(pair.baseline, pair.actor);

        pair.polyak_rate = 0.5;
        pair.baseline.params_mut().iter_mut().for_each(|p| *p = 0.0);
        pair.update_baseline().unwrap();
        for (b, a) in pair.baseline.params().iter().zip(pair.actor.params()) {
            assert_eq!(*b, a / 2.0);
        }
    }

    #[test]
    fn baseline_converges_geometrically() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut pair = PolicyPair::new(1, 1, &[], Activation::Tanh, 0.2, &mut rng).unwrap();
        pair.baseline.params_mut().iter_mut().for_each(|p| *p = 0.0);
        pair.actor.params_mut()[0] = 1.0;
        let mut gap = 1.0f64;
        for _ in 0..20 {
            pair.update_baseline().unwrap();
            gap *= 0.8;
            assert!(((pair.actor.params()[0] - pair.baseline.params()[0]) - gap).abs() < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn score_equals_log_prob_gradient(seed in any::<u64>(), s in prop::collection::vec(-1.0f64..1.0, 3), a in prop::collection::vec(-2.0f64..2.0, 2)) {
                let net = random_actor(seed);
                let mut g = net.new_grad_buffer();
                score_backward(&net, &s, &a, 1.0, &mut g).unwrap();
                for i in 0..net.parameter_count() {
                    let fd = fd_log_prob(&net, &s, &a, i, 1e-5);
                    let an = g.as_slice()[i];
                    let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-3);
                    prop_assert!(rel < 1e-6);
                }
            }
        }
    }
}
