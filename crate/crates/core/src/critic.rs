//! State-value critic with a Polyak-averaged target network.

use rand::Rng;

use crate::error::{Error, Result};
use crate::net::{optimize_step, Activation, AdamState, Mlp};
use crate::replay::Transition;

#[derive(Debug, Clone)]
pub struct CriticPair {
    pub value_net: Mlp,
    pub target_net: Mlp,
    pub polyak_rate: f64,
    pub gamma: f64,
}

impl CriticPair {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        hidden: &[usize],
        activation: Activation,
        polyak_rate: f64,
        gamma: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let value_net = Mlp::new(&sizes, activation, rng)?;
        Self::from_nets(value_net.clone(), value_net, polyak_rate, gamma)
    }

    pub fn from_nets(value_net: Mlp, target_net: Mlp, polyak_rate: f64, gamma: f64) -> Result<Self> {
        if value_net.layer_sizes() != target_net.layer_sizes() || value_net.output_size() != 1 {
            return Err(Error::Config(
                "critic nets must share a shape with a scalar output".into(),
            ));
        }
        if !(polyak_rate > 0.0 && polyak_rate <= 1.0) {
            return Err(Error::Config(format!(
                "critic polyak rate {polyak_rate} outside (0, 1]"
            )));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Config(format!("discount {gamma} outside [0, 1)")));
        }
        Ok(Self {
            value_net,
            target_net,
            polyak_rate,
            gamma,
        })
    }

    pub fn value(&self, state: &[f64]) -> Result<f64> {
        Ok(self.value_net.forward(state)?[0])
    }

    /// Bootstrapped target `r + gamma * V_target(s')`, with no bootstrap on
    /// absorbing transitions.
    pub fn td_target(&self, t: &Transition) -> Result<f64> {
        let bootstrap = if t.terminal {
            0.0
        } else {
            self.target_net.forward(&t.next_state)?[0]
        };
        Ok(t.reward + self.gamma * bootstrap)
    }

    /// TD-error advantage `r + gamma V_target(s') - V(s)`.
    pub fn advantage(&self, t: &Transition) -> Result<f64> {
        Ok(self.td_target(t)? - self.value(&t.state)?)
    }

    /// One descent step on `mean(TD^2) / 2`; returns the pre-step loss.
    pub fn critic_step(&mut self, batch: &[Transition], optimizer: &mut AdamState) -> Result<f64> {
        Ok(self.critic_step_with_advantages(batch, optimizer)?.0)
    }

    /// Like [`CriticPair::critic_step`], also returning each sample's pre-step
    /// TD error so callers can reuse them as advantages.
    pub fn critic_step_with_advantages(
        &mut self,
        batch: &[Transition],
        optimizer: &mut AdamState,
    ) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::Empty("critic_step"));
        }
        let n = batch.len() as f64;
        let mut grads = self.value_net.new_grad_buffer();
        let mut td_errors = Vec::with_capacity(batch.len());
        let mut loss = 0.0;
        for t in batch {
            let target = self.td_target(t)?;
            let trace = self.value_net.forward_trace(&t.state)?;
            let delta = target - trace.output()[0];
            loss += 0.5 * delta * delta;
            // d/dV of delta^2 / (2n)
            self.value_net.backward_trace(&trace, &[-delta / n], &mut grads)?;
            td_errors.push(delta);
        }
        let loss = loss / n;
        if !loss.is_finite() {
            return Err(Error::NonFinite("critic loss"));
        }
        optimize_step(&mut self.value_net, &grads, optimizer)?;
        Ok((loss, td_errors))
    }

    pub fn update_target(&mut self) -> Result<()> {
        self.target_net.soft_update_from(&self.value_net, self.polyak_rate)
    }
}
