//! Replay-based actor-critic training loop around the surrogate objectives.
//!
//! Actions are drawn from the baseline policy `b`. Every `steps_per_update`
//! environment steps one critic step and one actor step run on a replayed
//! minibatch, after which the baseline and target nets track their online
//! counterparts and the threshold estimator sees the batch's `|rho_beta - 1|`.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::critic::CriticPair;
use crate::envs::{make_env, Environment};
use crate::error::{check_dim, Error, Result};
use crate::net::{optimize_step, Activation, AdamState, GradBuffer, Mlp};
use crate::policy::{head, PolicyPair, TracedHead};
use crate::replay::{ReplayBuffer, Transition};
use crate::surrogate::{
    check_rpe_epsilon, pearson_divergence_estimate, surrogate_coefficient, surrogate_objective,
    Method, RatioPoint, SurrogateConfig,
};
use crate::threshold::ThresholdState;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub env: String,
    pub surrogate: SurrogateConfig,
    /// Adaptive-threshold parameters; only read by `rpe_adaptive`.
    pub threshold: ThresholdState,
    /// Feed the threshold one deviation at a time instead of one batch max.
    pub threshold_per_sample: bool,
    pub episodes: usize,
    pub steps_per_update: usize,
    pub batch_size: usize,
    /// Environment steps collected before the first update.
    pub warmup_steps: usize,
    pub capacity: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub actor_polyak: f64,
    pub critic_polyak: f64,
    pub entropy_bonus: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            env: "double-integrator".into(),
            surrogate: SurrogateConfig::default(),
            threshold: ThresholdState::default(),
            threshold_per_sample: false,
            episodes: 300,
            steps_per_update: 50,
            batch_size: 100,
            warmup_steps: 0,
            capacity: 100_000,
            learning_rate: 3e-4,
            gamma: 0.99,
            actor_polyak: 0.01,
            critic_polyak: 0.01,
            entropy_bonus: 0.01,
            hidden: vec![64, 64],
            activation: Activation::Swish,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        self.surrogate.validate()?;
        // re-run the constructor checks on the threshold parameters
        let t = &self.threshold;
        ThresholdState::new(t.lambda, t.kappa, t.delta_lower)?;
        if self.surrogate.method == Method::RpeAdaptive {
            check_rpe_epsilon(self.surrogate.beta, t.epsilon_bounds().1)?;
        }
        let positive = [
            ("steps_per_update", self.steps_per_update),
            ("batch_size", self.batch_size),
            ("capacity", self.capacity),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be finite and nonnegative",
                self.learning_rate
            )));
        }
        if !(self.entropy_bonus >= 0.0 && self.entropy_bonus.is_finite()) {
            return Err(Error::Config(format!(
                "entropy bonus {} must be finite and nonnegative",
                self.entropy_bonus
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("discount {} outside [0, 1)", self.gamma)));
        }
        for (name, rate) in [("actor", self.actor_polyak), ("critic", self.critic_polyak)] {
            if !(rate > 0.0 && rate <= 1.0) {
                return Err(Error::Config(format!(
                    "{name} polyak rate {rate} outside (0, 1]"
                )));
            }
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        make_env(&self.env)?;
        Ok(())
    }
}

/// Per-episode log row. Metrics that need an update are NaN for episodes
/// without one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    pub episode: usize,
    pub episode_return: f64,
    pub epsilon_mean: f64,
    pub pearson_divergence: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub wall_ms: u64,
}

impl TrainRecord {
    /// Equality ignoring wall time, with NaN equal to NaN.
    pub fn same_values(&self, other: &Self) -> bool {
        let eq = |a: f64, b: f64| a.to_bits() == b.to_bits();
        self.episode == other.episode
            && eq(self.episode_return, other.episode_return)
            && eq(self.epsilon_mean, other.epsilon_mean)
            && eq(self.pearson_divergence, other.pearson_divergence)
            && eq(self.actor_loss, other.actor_loss)
            && eq(self.critic_loss, other.critic_loss)
    }
}

/// Diagnostics of one actor-critic update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub epsilon: f64,
    pub pearson_divergence: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
}

#[derive(Default)]
struct EpisodeAccumulator {
    updates: usize,
    epsilon: f64,
    epsilon_range: Option<(f64, f64)>,
    divergence: f64,
    actor_loss: f64,
    critic_loss: f64,
}

impl EpisodeAccumulator {
    fn add(&mut self, s: &UpdateStats) {
        self.updates += 1;
        self.epsilon += s.epsilon;
        let (lo, hi) = self.epsilon_range.unwrap_or((s.epsilon, s.epsilon));
        self.epsilon_range = Some((lo.min(s.epsilon), hi.max(s.epsilon)));
        self.divergence += s.pearson_divergence;
        self.actor_loss += s.actor_loss;
        self.critic_loss += s.critic_loss;
    }

    /// Rounding can push a sum-based mean just past the averaged values.
    fn epsilon_mean(&self) -> Option<f64> {
        let (lo, hi) = self.epsilon_range?;
        Some(self.mean(self.epsilon).clamp(lo, hi))
    }

    fn mean(&self, sum: f64) -> f64 {
        if self.updates == 0 {
            f64::NAN
        } else {
            sum / self.updates as f64
        }
    }
}

pub struct Trainer {
    config: TrainerConfig,
    env: Box<dyn Environment>,
    policy: PolicyPair,
    critic: CriticPair,
    actor_opt: AdamState,
    critic_opt: AdamState,
    replay: ReplayBuffer,
    threshold: ThresholdState,
    rng: ChaCha8Rng,
    total_steps: usize,
    episodes_done: usize,
    divergence_trace: Vec<f64>,
}

impl Trainer {
    pub fn new(config: TrainerConfig) -> Result<Self> {
        config.validate()?;
        let env = make_env(&config.env)?;
        let spec = env.spec().clone();
        let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
        let policy = PolicyPair::new(
            spec.state_dim,
            spec.action_dim,
            &config.hidden,
            config.activation,
            config.actor_polyak,
            &mut init_rng,
        )?;
        let critic = CriticPair::new(
            spec.state_dim,
            &config.hidden,
            config.activation,
            config.critic_polyak,
            config.gamma,
            &mut init_rng,
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        let mut replay_seed = ChaCha8Rng::seed_from_u64(config.seed);
        replay_seed.set_stream(2);
        let replay = ReplayBuffer::new(config.capacity, rand::RngCore::next_u64(&mut replay_seed))?;
        let t = config.threshold;
        Ok(Self {
            actor_opt: AdamState::for_net(config.learning_rate, &policy.actor),
            critic_opt: AdamState::for_net(config.learning_rate, &critic.value_net),
            threshold: ThresholdState::new(t.lambda, t.kappa, t.delta_lower)?,
            config,
            env,
            policy,
            critic,
            replay,
            rng,
            total_steps: 0,
            episodes_done: 0,
            divergence_trace: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn policy(&self) -> &PolicyPair {
        &self.policy
    }

    pub fn critic(&self) -> &CriticPair {
        &self.critic
    }

    pub fn threshold(&self) -> &ThresholdState {
        &self.threshold
    }

    /// Pearson divergence estimate of every update so far, in order.
    pub fn divergence_trace(&self) -> &[f64] {
        &self.divergence_trace
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    /// Threshold the next update will use.
    pub fn epsilon_now(&self) -> f64 {
        match self.config.surrogate.method {
            Method::RpeAdaptive => self.threshold.current_epsilon(),
            _ => self.config.surrogate.epsilon,
        }
    }

    /// Runs the remaining configured episodes.
    pub fn run(&mut self) -> Result<Vec<TrainRecord>> {
        let remaining = self.config.episodes.saturating_sub(self.episodes_done);
        (0..remaining).map(|_| self.run_episode()).collect()
    }

    pub fn run_episode(&mut self) -> Result<TrainRecord> {
        let start = Instant::now();
        let mut state = self.env.reset(&mut self.rng);
        let mut acc = EpisodeAccumulator::default();
        let mut episode_return = 0.0;
        loop {
            let action = head(&self.policy.baseline, &state)?.sample(&mut self.rng);
            let behavior_log_prob = head(&self.policy.baseline, &state)?.log_prob(&action);
            let step = self.env.step(&action)?;
            episode_return += step.reward;
            self.replay.push(Transition {
                state,
                action,
                reward: step.reward,
                next_state: step.observation.clone(),
                terminal: step.failed(),
                behavior_log_prob,
            });
            self.total_steps += 1;
            if self.total_steps.is_multiple_of(self.config.steps_per_update)
                && self.total_steps >= self.config.warmup_steps
                && self.replay.len() >= self.config.batch_size
            {
                let stats = self.update()?;
                acc.add(&stats);
            }
            if step.terminal {
                break;
            }
            state = step.observation;
        }
        let record = TrainRecord {
            episode: self.episodes_done,
            episode_return,
            epsilon_mean: acc.epsilon_mean().unwrap_or_else(|| self.epsilon_now()),
            pearson_divergence: acc.mean(acc.divergence),
            actor_loss: acc.mean(acc.actor_loss),
            critic_loss: acc.mean(acc.critic_loss),
            wall_ms: start.elapsed().as_millis() as u64,
        };
        self.episodes_done += 1;
        Ok(record)
    }

    /// One critic step and one actor step on a fresh minibatch.
    pub fn update(&mut self) -> Result<UpdateStats> {
        let update = self.divergence_trace.len();
        let batch = self.replay.sample(self.config.batch_size)?;
        let (critic_loss, advantages) = self
            .critic
            .critic_step_with_advantages(&batch, &mut self.critic_opt)?;
        if !critic_loss.is_finite() {
            return Err(Error::Diverged { update, what: "critic loss" });
        }

        let epsilon = self.epsilon_now();
        let ActorGradient {
            loss: actor_loss,
            grads,
            ratios,
            deviations,
        } = actor_gradient(
            &self.policy,
            &self.config.surrogate,
            epsilon,
            self.config.entropy_bonus,
            &batch,
            &advantages,
        )?;
        if !actor_loss.is_finite() {
            return Err(Error::Diverged { update, what: "actor loss" });
        }
        optimize_step(&mut self.policy.actor, &grads, &mut self.actor_opt)
            .map_err(|_| Error::Diverged { update, what: "actor gradient" })?;
        self.policy.update_baseline()?;
        self.critic.update_target()?;
        if self.config.threshold_per_sample {
            self.threshold.observe_each(&deviations)?;
        } else {
            self.threshold.observe(&deviations)?;
        }
        let pearson_divergence = pearson_divergence_estimate(&ratios)?;
        self.divergence_trace.push(pearson_divergence);
        Ok(UpdateStats {
            epsilon,
            pearson_divergence,
            actor_loss,
            critic_loss,
        })
    }
}

/// Minibatch actor loss, its gradient, and per-sample ratio diagnostics.
#[derive(Debug, Clone)]
pub struct ActorGradient {
    /// `-(mean objective + entropy_bonus * mean entropy)`.
    pub loss: f64,
    pub grads: GradBuffer,
    pub ratios: Vec<f64>,
    /// `|rho_beta - 1|` per sample.
    pub deviations: Vec<f64>,
}

/// Evaluates the surrogate actor loss on `batch` with the given advantages,
/// `rho = pi / b` taken from the current actor and baseline nets.
pub fn actor_gradient(
    policy: &PolicyPair,
    surrogate: &SurrogateConfig,
    epsilon: f64,
    entropy_bonus: f64,
    batch: &[Transition],
    advantages: &[f64],
) -> Result<ActorGradient> {
    if batch.is_empty() {
        return Err(Error::Empty("actor_gradient"));
    }
    check_dim("actor_gradient advantages", batch.len(), advantages.len())?;
    let n = batch.len() as f64;
    let mut grads = policy.actor.new_grad_buffer();
    let mut ratios = Vec::with_capacity(batch.len());
    let mut deviations = Vec::with_capacity(batch.len());
    let mut objective = 0.0;
    let mut entropy = 0.0;
    for (t, &advantage) in batch.iter().zip(advantages) {
        let traced = TracedHead::new(&policy.actor, &t.state)?;
        let log_pi = traced.head.log_prob(&t.action);
        let log_b = head(&policy.baseline, &t.state)?.log_prob(&t.action);
        let point = RatioPoint::from_log_densities(log_pi, log_b, advantage, surrogate)?;
        objective += surrogate_objective(&point, surrogate, epsilon);
        entropy += traced.head.entropy();
        let w = surrogate_coefficient(&point, surrogate, epsilon)?;
        let (mut d_mean, mut d_log_scale) = traced.head.log_prob_gradients(&t.action);
        d_mean.iter_mut().for_each(|g| *g *= -w / n);
        // entropy is sum(log_scale) + const, so its gradient is one per dim
        d_log_scale
            .iter_mut()
            .for_each(|g| *g = -w / n * *g - entropy_bonus / n);
        traced.backward(&policy.actor, &d_mean, &d_log_scale, &mut grads)?;
        ratios.push(point.rho);
        deviations.push((point.rho_beta - 1.0).abs());
    }
    Ok(ActorGradient {
        loss: -(objective + entropy_bonus * entropy) / n,
        grads,
        ratios,
        deviations,
    })
}

/// Trains from scratch for `config.episodes` episodes.
pub fn run(config: TrainerConfig) -> Result<Vec<TrainRecord>> {
    Trainer::new(config)?.run()
}

/// Median and quartiles of evaluation returns.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalStats {
    pub returns: Vec<f64>,
    pub median: f64,
    pub lower_quartile: f64,
    pub upper_quartile: f64,
}

impl EvalStats {
    pub fn from_returns(returns: Vec<f64>) -> Result<Self> {
        if returns.is_empty() {
            return Err(Error::Empty("EvalStats::from_returns"));
        }
        if returns.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("evaluation return"));
        }
        let mut sorted = returns.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            median: quantile(&sorted, 0.5),
            lower_quartile: quantile(&sorted, 0.25),
            upper_quartile: quantile(&sorted, 0.75),
            returns,
        })
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Rolls out the actor's mean action for `n_episodes` episodes.
pub fn evaluate(env_name: &str, actor: &Mlp, n_episodes: usize, seed: u64) -> Result<EvalStats> {
    let mut env = make_env(env_name)?;
    let spec = env.spec().clone();
    if actor.input_size() != spec.state_dim || actor.output_size() != 2 * spec.action_dim {
        return Err(Error::Dimension {
            context: "evaluate actor shape",
            expected: spec.state_dim,
            actual: actor.input_size(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut returns = Vec::with_capacity(n_episodes);
    for _ in 0..n_episodes {
        let mut state = env.reset(&mut rng);
        let mut total = 0.0;
        loop {
            let step = env.step(&head(actor, &state)?.mean)?;
            total += step.reward;
            if step.terminal {
                break;
            }
            state = step.observation;
        }
        returns.push(total);
    }
    EvalStats::from_returns(returns)
}
