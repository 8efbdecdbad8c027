//! Small continuous-control tasks with a common episode protocol.
//!
//! Cart-pole and the double integrator integrate with semi-implicit Euler at
//! `DT`; the pendulum uses velocity Verlet at the same step. Actions are
//! clamped to the spec bounds before they touch the dynamics.

use std::f64::consts::PI;

use rand::{Rng, RngCore};

use crate::error::{check_dim, Error, Result};

pub const DT: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub name: &'static str,
    pub state_dim: usize,
    pub action_dim: usize,
    pub max_steps: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
}

impl EnvSpec {
    fn clamp_action(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(&a, (&lo, &hi))| a.clamp(lo, hi))
            .collect()
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// The episode is over, by failure or by the step limit.
    pub terminal: bool,
    /// The episode ended only because the step limit was reached.
    pub truncated: bool,
}

impl Step {
    /// True when the episode ended in an absorbing failure state.
    pub fn failed(&self) -> bool {
        self.terminal && !self.truncated
    }
}

pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Draws a random initial state and starts a new episode.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;

    fn step(&mut self, action: &[f64]) -> Result<Step>;

    fn step_count(&self) -> usize;
}

pub const ENV_NAMES: [&str; 3] = ["cartpole", "pendulum-swingup", "double-integrator"];

pub fn make_env(name: &str) -> Result<Box<dyn Environment>> {
    match name {
        "cartpole" => Ok(Box::new(CartPole::new())),
        "pendulum-swingup" => Ok(Box::new(PendulumSwingup::new())),
        "double-integrator" => Ok(Box::new(DoubleIntegrator::new())),
        other => Err(Error::UnknownEnv(other.to_string())),
    }
}

/// Shared episode bookkeeping.
#[derive(Debug, Clone, Default)]
struct Episode {
    steps: usize,
    active: bool,
}

impl Episode {
    fn start(&mut self) {
        self.steps = 0;
        self.active = true;
    }

    fn begin_step(&self) -> Result<()> {
        if self.active {
            Ok(())
        } else {
            Err(Error::EpisodeFinished)
        }
    }

    /// Advances the counter and returns `(terminal, truncated)`.
    fn end_step(&mut self, failed: bool, max_steps: usize) -> (bool, bool) {
        self.steps += 1;
        let out_of_time = self.steps >= max_steps;
        let terminal = failed || out_of_time;
        if terminal {
            self.active = false;
        }
        (terminal, out_of_time && !failed)
    }
}

/// Cart-pole balancing. State `[x, x_dot, theta, theta_dot]`, theta measured
/// from upright. Action in `[-1, 1]` scales a 10 N push. Reward +1 per step;
/// the episode fails when `|theta| > 0.21` or `|x| > 2.4`.
#[derive(Debug, Clone)]
pub struct CartPole {
    spec: EnvSpec,
    pub state: [f64; 4],
    episode: Episode,
}

impl CartPole {
    const GRAVITY: f64 = 9.8;
    const CART_MASS: f64 = 1.0;
    const POLE_MASS: f64 = 0.1;
    const HALF_LENGTH: f64 = 0.5;
    const FORCE: f64 = 10.0;
    pub const ANGLE_LIMIT: f64 = 0.21;
    pub const POSITION_LIMIT: f64 = 2.4;

    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "cartpole",
                state_dim: 4,
                action_dim: 1,
                max_steps: 200,
                action_low: vec![-1.0],
                action_high: vec![1.0],
            },
            state: [0.0; 4],
            episode: Episode::default(),
        }
    }

    /// Starts an episode from an explicit state.
    pub fn reset_to(&mut self, state: [f64; 4]) -> Vec<f64> {
        self.state = state;
        self.episode.start();
        state.to_vec()
    }
}

impl Default for CartPole {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for CartPole {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let mut s = [0.0; 4];
        for v in &mut s {
            *v = rng.random_range(-0.05..=0.05);
        }
        self.reset_to(s)
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        self.episode.begin_step()?;
        check_dim("CartPole::step action", 1, action.len())?;
        let force = Self::FORCE * self.spec.clamp_action(action)[0];
        let [x, x_dot, theta, theta_dot] = self.state;
        let total_mass = Self::CART_MASS + Self::POLE_MASS;
        let pole_ml = Self::POLE_MASS * Self::HALF_LENGTH;
        let (sin, cos) = theta.sin_cos();
        let temp = (force + pole_ml * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc = (Self::GRAVITY * sin - cos * temp)
            / (Self::HALF_LENGTH * (4.0 / 3.0 - Self::POLE_MASS * cos * cos / total_mass));
        let x_acc = temp - pole_ml * theta_acc * cos / total_mass;

        let x_dot = x_dot + DT * x_acc;
        let x = x + DT * x_dot;
        let theta_dot = theta_dot + DT * theta_acc;
        let theta = theta + DT * theta_dot;
        self.state = [x, x_dot, theta, theta_dot];

        let failed = theta.abs() > Self::ANGLE_LIMIT || x.abs() > Self::POSITION_LIMIT;
        let (terminal, truncated) = self.episode.end_step(failed, self.spec.max_steps);
        Ok(Step {
            observation: self.state.to_vec(),
            reward: 1.0,
            terminal,
            truncated,
        })
    }

    fn step_count(&self) -> usize {
        self.episode.steps
    }
}

/// Torque-limited pendulum swing-up. Angle measured from upright, so the
/// hanging rest state is `theta = pi`. Observation `[cos, sin, theta_dot]`,
/// torque in `[-2, 2]`, reward `cos(theta) - 0.01 u^2`.
#[derive(Debug, Clone)]
pub struct PendulumSwingup {
    spec: EnvSpec,
    pub theta: f64,
    pub theta_dot: f64,
    episode: Episode,
}

impl PendulumSwingup {
    pub const GRAVITY: f64 = 9.81;
    pub const MASS: f64 = 1.0;
    pub const LENGTH: f64 = 1.0;

    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "pendulum-swingup",
                state_dim: 3,
                action_dim: 1,
                max_steps: 200,
                action_low: vec![-2.0],
                action_high: vec![2.0],
            },
            theta: PI,
            theta_dot: 0.0,
            episode: Episode::default(),
        }
    }

    pub fn reset_to(&mut self, theta: f64, theta_dot: f64) -> Vec<f64> {
        self.theta = wrap_angle(theta);
        self.theta_dot = theta_dot;
        self.episode.start();
        self.observation()
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }

    fn inertia() -> f64 {
        Self::MASS * Self::LENGTH * Self::LENGTH
    }

    /// Kinetic plus potential energy, zero potential at the pivot height.
    pub fn energy(&self) -> f64 {
        0.5 * Self::inertia() * self.theta_dot * self.theta_dot
            + Self::MASS * Self::GRAVITY * Self::LENGTH * self.theta.cos()
    }
}

impl Default for PendulumSwingup {
    fn default() -> Self {
        Self::new()
    }
}

/// Maps an angle into `(-pi, pi]`.
fn wrap_angle(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t == -PI {
        PI
    } else {
        t
    }
}

impl Environment for PendulumSwingup {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    /// Angle uniform in `(-pi, pi]`, angular velocity uniform in `[-1, 1]`.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        // (-pi, pi] as the reflection of [-pi, pi)
        let theta = -rng.random_range(-PI..PI);
        let theta_dot = rng.random_range(-1.0..=1.0);
        self.reset_to(theta, theta_dot)
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        self.episode.begin_step()?;
        check_dim("PendulumSwingup::step action", 1, action.len())?;
        let torque = self.spec.clamp_action(action)[0];
        // velocity Verlet
        let accel = |theta: f64| Self::GRAVITY / Self::LENGTH * theta.sin() + torque / Self::inertia();
        let half = self.theta_dot + 0.5 * DT * accel(self.theta);
        let theta = self.theta + DT * half;
        self.theta_dot = half + 0.5 * DT * accel(theta);
        self.theta = wrap_angle(theta);
        let reward = self.theta.cos() - 0.01 * torque * torque;
        let (terminal, truncated) = self.episode.end_step(false, self.spec.max_steps);
        Ok(Step {
            observation: self.observation(),
            reward,
            terminal,
            truncated,
        })
    }

    fn step_count(&self) -> usize {
        self.episode.steps
    }
}

/// Unit-mass point on a line, `x'' = u`. State `[x, x_dot]`, force in
/// `[-2, 2]`, reward `-(x^2 + 0.1 x_dot^2 + 0.01 u^2)`.
#[derive(Debug, Clone)]
pub struct DoubleIntegrator {
    spec: EnvSpec,
    pub state: [f64; 2],
    episode: Episode,
}

impl DoubleIntegrator {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "double-integrator",
                state_dim: 2,
                action_dim: 1,
                max_steps: 100,
                action_low: vec![-2.0],
                action_high: vec![2.0],
            },
            state: [0.0; 2],
            episode: Episode::default(),
        }
    }

    pub fn reset_to(&mut self, state: [f64; 2]) -> Vec<f64> {
        self.state = state;
        self.episode.start();
        state.to_vec()
    }
}

impl Default for DoubleIntegrator {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for DoubleIntegrator {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    /// Position uniform in `[-1, 1]`, velocity uniform in `[-0.5, 0.5]`.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let x = rng.random_range(-1.0..=1.0);
        let v = rng.random_range(-0.5..=0.5);
        self.reset_to([x, v])
    }

    fn step(&mut self, action: &[f64]) -> Result<Step> {
        self.episode.begin_step()?;
        check_dim("DoubleIntegrator::step action", 1, action.len())?;
        let u = self.spec.clamp_action(action)[0];
        let [x, v] = self.state;
        let reward = -(x * x + 0.1 * v * v + 0.01 * u * u);
        let v = v + DT * u;
        let x = x + DT * v;
        self.state = [x, v];
        let (terminal, truncated) = self.episode.end_step(false, self.spec.max_steps);
        Ok(Step {
            observation: self.state.to_vec(),
            reward,
            terminal,
            truncated,
        })
    }

    fn step_count(&self) -> usize {
        self.episode.steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn make_env_by_name() {
        for name in ENV_NAMES {
            assert_eq!(make_env(name).unwrap().spec().name, name);
        }
        assert!(matches!(make_env("hopper"), Err(Error::UnknownEnv(_))));
    }

    #[test]
    fn cartpole_reset_bounds() {
        let mut env = CartPole::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut max_angle: f64 = 0.0;
        for _ in 0..2000 {
            let obs = env.reset(&mut rng);
            assert!(obs.iter().all(|v| v.abs() <= 0.05));
            max_angle = max_angle.max(obs[2].abs());
        }
        // the full range is actually used
        assert!(max_angle > 0.049);
    }

    #[test]
    fn pendulum_reset_bounds() {
        let mut env = PendulumSwingup::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..5000 {
            env.reset(&mut rng);
            assert!(env.theta > -PI && env.theta <= PI);
            lo = lo.min(env.theta);
            hi = hi.max(env.theta);
        }
        assert!(lo < -3.0 && hi > 3.0);
    }

    #[test]
    fn reset_is_seeded() {
        for name in ENV_NAMES {
            let mut a = make_env(name).unwrap();
            let mut b = make_env(name).unwrap();
            let oa = a.reset(&mut ChaCha8Rng::seed_from_u64(5));
            let ob = b.reset(&mut ChaCha8Rng::seed_from_u64(5));
            assert_eq!(oa, ob);
        }
    }

    #[test]
    fn cartpole_upright_zero_action() {
        let mut env = CartPole::new();
        env.reset_to([0.0; 4]);
        let s = env.step(&[0.0]).unwrap();
        assert_eq!(s.reward, 1.0);
        assert!(!s.terminal);
        assert_eq!(s.observation, vec![0.0; 4]);
    }

    #[test]
    fn cartpole_fails_past_angle_limit() {
        let mut env = CartPole::new();
        env.reset_to([0.0, 0.0, 0.215, 0.0]);
        let s = env.step(&[0.0]).unwrap();
        assert!(s.terminal && s.failed());
        assert_eq!(env.step(&[0.0]), Err(Error::EpisodeFinished));
    }

    #[test]
    fn cartpole_fails_past_track_edge() {
        let mut env = CartPole::new();
        env.reset_to([2.39, 1.0, 0.0, 0.0]);
        assert!(env.step(&[0.0]).unwrap().failed());
    }

    #[test]
    fn step_limit_truncates() {
        let mut env = DoubleIntegrator::new();
        env.reset_to([0.0, 0.0]);
        for i in 0..100 {
            let s = env.step(&[0.0]).unwrap();
            assert_eq!(s.terminal, i == 99);
            assert!(!s.failed());
        }
        assert!(env.step(&[0.0]).is_err());
    }

    #[test]
    fn pendulum_hanging_rest_is_equilibrium() {
        let mut env = PendulumSwingup::new();
        let obs = env.reset_to(PI, 0.0);
        let s = env.step(&[0.0]).unwrap();
        assert!((s.reward + 1.0).abs() < 1e-12);
        for (a, b) in s.observation.iter().zip(&obs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pendulum_energy_is_conserved() {
        let mut env = PendulumSwingup::new();
        env.reset_to(PI - 1.0, 0.0);
        let e0 = env.energy();
        for _ in 0..200 {
            env.step(&[0.0]).unwrap();
            assert!((env.energy() - e0).abs() < 0.01 * e0.abs());
        }
    }

    #[test]
    fn actions_are_clamped() {
        let mut a = DoubleIntegrator::new();
        let mut b = DoubleIntegrator::new();
        a.reset_to([0.5, 0.0]);
        b.reset_to([0.5, 0.0]);
        assert_eq!(a.step(&[50.0]).unwrap(), b.step(&[2.0]).unwrap());
    }

    #[test]
    fn trajectories_are_deterministic() {
        let run = || {
            let mut env = make_env("pendulum-swingup").unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut obs = vec![env.reset(&mut rng)];
            for k in 0..50 {
                obs.push(env.step(&[(k as f64 * 0.3).sin()]).unwrap().observation);
            }
            obs
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }
}
