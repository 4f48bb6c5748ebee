//! The model-enhanced adversarial IRL training loop: replay buffers, transition-model
//! pretraining, interleaved discriminator / model / policy updates, a real-to-synthetic
//! batch ratio schedule and distribution-shift action mixing.
//!
//! Every stochastic choice draws from its own named stream of the run seed, so
//! switching one feature off leaves the draws of every other feature untouched.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversarial::{
    extract_reward, AdversarialError, ExpertBuffer, FMode, NeuralDiscSample, NeuralDiscriminator,
    TabularDiscSample, TabularDiscriminator,
};
use crate::dynamics::{
    gaussian_tv_1d, rollout_synthetic_continuous_with, rollout_synthetic_tabular_with, tv_distance,
    ContinuousSample, DynamicsError, GaussianDynamicsModel, TabularDynamicsEstimate, TabularSample,
};
use crate::mdp::{
    sample_index, ContinuousEnv, ContinuousTransition, DemoHeader, Demonstrations, TabularMdp,
    TabularPolicy, TabularTransition,
};
use crate::neural::{write_checkpoint, Activation, AdamState, Mlp, NeuralError};
use crate::policy_opt::{SacAgent, SacConfig, SacTransition, SoftQLearner};
use crate::rng::{sample_indices, stream, SeededRng};
use crate::soft_dp::{soft_optimal_policy, soft_value_iteration_oracle, DpError};

/// Stream ids for [`stream`]; one per independent source of randomness in a run.
mod streams {
    pub const ENV: u64 = 0;
    pub const ACTION: u64 = 1;
    pub const DISC_BATCH: u64 = 2;
    pub const POLICY_BATCH: u64 = 3;
    pub const ROLLOUT: u64 = 4;
    pub const MIX: u64 = 5;
    pub const EVAL: u64 = 6;
    pub const INIT: u64 = 7;
    pub const MODEL_BATCH: u64 = 8;
}

#[derive(Debug, Error)]
pub enum MeairlError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("step {step}: {source}")]
    Component {
        step: usize,
        #[source]
        source: ComponentError,
    },
    #[error("step {step}: non-finite {what}; snapshot: {snapshot}")]
    NonFinite {
        step: usize,
        what: &'static str,
        snapshot: String,
    },
    #[error("expert did not reach return {threshold} within {budget} steps (best {best})")]
    ExpertThreshold {
        threshold: f64,
        budget: usize,
        best: f64,
    },
    #[error("expert buffer: {0}")]
    Expert(#[from] AdversarialError),
    #[error("demonstrations hold {got} data, expected {expected}")]
    DemoKind {
        expected: &'static str,
        got: &'static str,
    },
    #[error("malformed training record: {0}")]
    Record(String),
}

/// Failure of one of the components driven by the loop.
#[derive(Debug, Error)]
pub enum ComponentError {
    #[error(transparent)]
    Adversarial(#[from] AdversarialError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Dp(#[from] DpError),
}

fn at<E: Into<ComponentError>>(step: usize) -> impl FnOnce(E) -> MeairlError {
    move |e| MeairlError::Component {
        step,
        source: e.into(),
    }
}

/// Bounded FIFO of transitions; pushing into a full buffer evicts the oldest item.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer<T> {
    items: VecDeque<T>,
    capacity: usize,
}

impl<T: Clone> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "replay buffer capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    /// Changes the capacity; shrinking drops the oldest items.
    pub fn set_capacity(&mut self, capacity: usize) {
        assert!(capacity >= 1, "replay buffer capacity must be positive");
        self.capacity = capacity;
        while self.items.len() > capacity {
            self.items.pop_front();
        }
    }

    pub fn get(&self, i: usize) -> Option<&T> {
        self.items.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    /// Uniform batch of `n`: without replacement when the buffer holds at least
    /// `n` items, with replacement otherwise. Empty buffers give an empty batch.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<T> {
        if self.items.is_empty() || n == 0 {
            return Vec::new();
        }
        sample_indices(self.items.len(), n, rng)
            .into_iter()
            .map(|i| self.items[i].clone())
            .collect()
    }
}

/// Synthetic share of the policy batch and capacity of the synthetic buffer, as
/// functions of the number of training steps since pretraining ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatioSchedule {
    pub rho_start: f64,
    pub rho_end: f64,
    /// Steps of the linear ramp from `rho_start` to `rho_end`; `None` means half of
    /// the post-pretraining budget.
    pub ramp_steps: Option<usize>,
    pub gen_capacity_initial: usize,
    pub gen_capacity_growth: f64,
    pub gen_capacity_max: usize,
}

impl Default for RatioSchedule {
    fn default() -> Self {
        Self {
            rho_start: 0.05,
            rho_end: 0.5,
            ramp_steps: None,
            gen_capacity_initial: 1_000,
            gen_capacity_growth: 2.0,
            gen_capacity_max: 50_000,
        }
    }
}

impl RatioSchedule {
    /// Constant zero schedule: no synthetic data in any batch.
    pub fn off() -> Self {
        Self {
            rho_start: 0.0,
            rho_end: 0.0,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), MeairlError> {
        for (name, r) in [("rho_start", self.rho_start), ("rho_end", self.rho_end)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(MeairlError::Config(format!(
                    "{name} must lie in [0, 1], got {r}"
                )));
            }
        }
        if self.gen_capacity_initial == 0 || self.gen_capacity_max < self.gen_capacity_initial {
            return Err(MeairlError::Config(
                "synthetic capacity needs 1 <= initial <= max".into(),
            ));
        }
        if !(self.gen_capacity_growth >= 0.0) {
            return Err(MeairlError::Config(
                "gen_capacity_growth must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Synthetic fraction after `t` training steps with a ramp of `ramp` steps.
    pub fn fraction(&self, t: usize, ramp: usize) -> f64 {
        if ramp == 0 || t >= ramp {
            return self.rho_end;
        }
        let u = t as f64 / ramp as f64;
        (self.rho_start + u * (self.rho_end - self.rho_start)).clamp(0.0, 1.0)
    }

    /// Synthetic items in a batch of `batch`: the scheduled fraction, rounded.
    pub fn synthetic_count(&self, batch: usize, t: usize, ramp: usize) -> usize {
        ((self.fraction(t, ramp) * batch as f64).round() as usize).min(batch)
    }

    pub fn gen_capacity(&self, t: usize) -> usize {
        let c = self.gen_capacity_initial as f64 + self.gen_capacity_growth * t as f64;
        (c.floor() as usize).clamp(self.gen_capacity_initial, self.gen_capacity_max)
    }
}

/// Hyperparameters of the neural (continuous-state) variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuralConfig {
    pub disc_hidden: Vec<usize>,
    pub model_hidden: Vec<usize>,
    pub model_lr: f64,
    pub model_batch: usize,
    pub sac_hidden: Vec<usize>,
    pub sac_alpha: f64,
    pub sac_tau: f64,
    pub sac_lr: f64,
    /// Gradient-norm clip for every network; `0` disables clipping.
    pub clip_norm: f64,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        Self {
            disc_hidden: vec![64, 64],
            model_hidden: vec![64, 64],
            model_lr: 1e-3,
            model_batch: 64,
            sac_hidden: vec![64, 64],
            sac_alpha: 0.2,
            sac_tau: 0.005,
            sac_lr: 3e-4,
            clip_norm: 10.0,
        }
    }
}

/// Every knob of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    /// Total environment steps `N`.
    pub total_steps: usize,
    /// Steps of model-only pretraining before any discriminator or policy update.
    pub starting_step: usize,
    /// Length `H` of each synthetic rollout.
    pub rollout_horizon: usize,
    /// Synthetic rollouts launched per model update.
    pub rollouts_per_update: usize,
    /// Environment steps between model refreshes and rollout launches.
    pub model_update_period: usize,
    pub disc_updates_per_step: usize,
    pub policy_updates_per_step: usize,
    pub disc_batch: usize,
    pub policy_batch: usize,
    pub env_capacity: usize,
    pub schedule: RatioSchedule,
    /// Probability of acting on the model-predicted state instead of the real one.
    pub mix_prob: f64,
    /// Fill and use the synthetic buffer.
    pub synthetic: bool,
    /// Also draw synthetic samples into the discriminator's policy batch.
    pub disc_uses_synthetic: bool,
    /// Successor-potential estimate in the discriminator.
    pub shaping: FMode,
    pub disc_lr: f64,
    pub policy_lr: f64,
    /// Soft Q-learning temperature in the tabular variant.
    pub temperature: f64,
    /// Dirichlet smoothing of the tabular model.
    pub model_alpha: f64,
    /// Model draws per `f` evaluation in the neural variant.
    pub n_model_samples: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Save network checkpoints every this many steps; `0` disables them.
    pub checkpoint_every: usize,
    pub seed: u64,
    pub neural: NeuralConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            total_steps: 50_000,
            starting_step: 2_000,
            rollout_horizon: 3,
            rollouts_per_update: 1,
            model_update_period: 1,
            disc_updates_per_step: 1,
            policy_updates_per_step: 1,
            disc_batch: 64,
            policy_batch: 64,
            env_capacity: 100_000,
            schedule: RatioSchedule::default(),
            mix_prob: 0.1,
            synthetic: true,
            disc_uses_synthetic: false,
            shaping: FMode::Model,
            disc_lr: 1e-2,
            policy_lr: 0.1,
            temperature: 1.0,
            model_alpha: 0.1,
            n_model_samples: 8,
            eval_every: 1_000,
            eval_episodes: 10,
            checkpoint_every: 0,
            seed: 0,
            neural: NeuralConfig::default(),
        }
    }
}

impl TrainingConfig {
    /// The sample-based AIRL comparison: observed-successor shaping, no synthetic
    /// data and no action mixing, everything else unchanged.
    pub fn sample_baseline(&self) -> Self {
        Self {
            shaping: FMode::Sample,
            synthetic: false,
            disc_uses_synthetic: false,
            mix_prob: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), MeairlError> {
        let bad = |m: &str| Err(MeairlError::Config(m.to_string()));
        if self.starting_step > self.total_steps {
            return bad("starting_step must not exceed total_steps");
        }
        if self.rollout_horizon < 1 {
            return bad("rollout_horizon must be at least 1");
        }
        if self.model_update_period < 1 || self.eval_every < 1 || self.eval_episodes < 1 {
            return bad("model_update_period, eval_every and eval_episodes must be positive");
        }
        if self.disc_batch < 1 || self.policy_batch < 1 || self.env_capacity < 1 {
            return bad("batch sizes and env_capacity must be positive");
        }
        if !(0.0..=1.0).contains(&self.mix_prob) {
            return bad("mix_prob must lie in [0, 1]");
        }
        if !(self.temperature > 0.0) || !(self.disc_lr > 0.0) || !(self.policy_lr > 0.0) {
            return bad("temperature and learning rates must be positive");
        }
        if self.n_model_samples < 1 {
            return bad("n_model_samples must be at least 1");
        }
        self.schedule.validate()
    }

    fn ramp(&self) -> usize {
        self.schedule
            .ramp_steps
            .unwrap_or((self.total_steps - self.starting_step) / 2)
    }

    fn clip(&self) -> Option<f64> {
        (self.neural.clip_norm > 0.0).then_some(self.neural.clip_norm)
    }
}

/// One evaluation point of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordRow {
    pub step: usize,
    pub return_mean: f64,
    pub return_std: f64,
    /// Mean discriminator loss since the previous row; NaN before training starts.
    pub disc_loss: f64,
    /// Mean `-log T̂(s'|s,a)` of environment transitions since the previous row,
    /// each scored before the model saw it.
    pub model_nll: f64,
    /// Distance between the learned and true transition model (see the run functions).
    pub eps_t: f64,
    /// Synthetic share of the most recent policy batch.
    pub synthetic_fraction: f64,
}

pub const RECORD_HEADER: &str =
    "step,return_mean,return_std,disc_loss,model_nll,eps_T,synthetic_fraction";

/// Training record: one row per evaluation point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingRecord {
    pub rows: Vec<RecordRow>,
}

impl TrainingRecord {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(RECORD_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.step,
                r.return_mean,
                r.return_std,
                r.disc_loss,
                r.model_nll,
                r.eps_t,
                r.synthetic_fraction
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, MeairlError> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == RECORD_HEADER => {}
            other => return Err(MeairlError::Record(format!("bad header {other:?}"))),
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 7 {
                return Err(MeairlError::Record(format!(
                    "line {}: expected 7 columns",
                    i + 2
                )));
            }
            let num = |k: usize| -> Result<f64, MeairlError> {
                cols[k]
                    .parse::<f64>()
                    .map_err(|e| MeairlError::Record(format!("line {}: {e}", i + 2)))
            };
            rows.push(RecordRow {
                step: cols[0]
                    .parse()
                    .map_err(|e| MeairlError::Record(format!("line {}: {e}", i + 2)))?,
                return_mean: num(1)?,
                return_std: num(2)?,
                disc_loss: num(3)?,
                model_nll: num(4)?,
                eps_t: num(5)?,
                synthetic_fraction: num(6)?,
            });
        }
        Ok(Self { rows })
    }

    /// First evaluation step whose mean return reaches `target`.
    pub fn steps_to(&self, target: f64) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.return_mean >= target)
            .map(|r| r.step)
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Picks the action to apply: with probability `mix_prob`, and only when a previous
/// transition exists, the agent acts on a state predicted from that transition
/// instead of the real state. Returns the action and whether the predicted state
/// was used.
pub fn mix_action<S, A, P, Q>(
    real_state: &S,
    prev: Option<(&S, &A)>,
    mix_prob: f64,
    mut predict: P,
    mut act: Q,
    mix_rng: &mut SeededRng,
    act_rng: &mut SeededRng,
) -> (A, bool)
where
    P: FnMut(&S, &A, &mut SeededRng) -> S,
    Q: FnMut(&S, &mut SeededRng) -> A,
{
    if let Some((ps, pa)) = prev {
        if mix_prob > 0.0 && mix_rng.random::<f64>() < mix_prob {
            let predicted = predict(ps, pa, mix_rng);
            return (act(&predicted, act_rng), true);
        }
    }
    (act(real_state, act_rng), false)
}

/// A tabular environment: an MDP plus a fixed episode length.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularEnv {
    pub name: String,
    pub mdp: TabularMdp,
    pub horizon: usize,
}

/// Per-episode discounted true returns of tabular demonstrations.
pub fn demo_returns_tabular(mdp: &TabularMdp, demos: &[TabularTransition]) -> Vec<f64> {
    episode_returns(
        demos
            .iter()
            .map(|t| (t.episode, t.t, mdp.reward_at(t.s, t.a))),
        mdp.discount(),
    )
}

/// Per-episode discounted true returns of continuous demonstrations.
pub fn demo_returns_continuous(env: &ContinuousEnv, demos: &[ContinuousTransition]) -> Vec<f64> {
    episode_returns(
        demos
            .iter()
            .map(|t| (t.episode, t.t, env.reward(&t.state, &t.action))),
        env.discount,
    )
}

fn episode_returns(items: impl Iterator<Item = (usize, usize, f64)>, discount: f64) -> Vec<f64> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for (ep, t, r) in items {
        let contrib = discount.powi(t as i32) * r;
        match out.iter_mut().find(|(e, _)| *e == ep) {
            Some((_, g)) => *g += contrib,
            None => out.push((ep, contrib)),
        }
    }
    out.into_iter().map(|(_, g)| g).collect()
}

/// Mean discounted true return over the episodes of `demos`.
pub fn expert_mean_return(
    demos: &Demonstrations,
    tabular: Option<&TabularMdp>,
    continuous: Option<&ContinuousEnv>,
) -> Result<f64, MeairlError> {
    let returns = match (demos, tabular, continuous) {
        (Demonstrations::Tabular { transitions, .. }, Some(mdp), _) => {
            demo_returns_tabular(mdp, transitions)
        }
        (Demonstrations::Continuous { transitions, .. }, _, Some(env)) => {
            demo_returns_continuous(env, transitions)
        }
        (Demonstrations::Tabular { .. }, ..) => {
            return Err(MeairlError::DemoKind {
                expected: "continuous",
                got: "tabular",
            })
        }
        (Demonstrations::Continuous { .. }, ..) => {
            return Err(MeairlError::DemoKind {
                expected: "tabular",
                got: "continuous",
            })
        }
    };
    Ok(mean_std(&returns).0)
}

/// Rolls out the soft-optimal policy of the true reward for `n_episodes` episodes.
pub fn generate_expert_tabular(
    env: &TabularEnv,
    seed: u64,
    n_episodes: usize,
) -> Result<Demonstrations, MeairlError> {
    if n_episodes == 0 {
        return Err(MeairlError::Config("n_episodes must be at least 1".into()));
    }
    let values = soft_value_iteration_oracle(&env.mdp).map_err(at(0))?;
    let policy = soft_optimal_policy(&values);
    let mut rng = stream(seed, streams::ENV);
    let mut transitions = Vec::with_capacity(n_episodes * env.horizon);
    for episode in 0..n_episodes {
        let mut s = env.mdp.sample_initial(&mut rng);
        for t in 0..env.horizon {
            let a = policy.sample(s, &mut rng);
            let next = env.mdp.sample_next(s, a, &mut rng);
            transitions.push(TabularTransition {
                episode,
                t,
                s,
                a,
                next,
            });
            s = next;
        }
    }
    Ok(Demonstrations::Tabular {
        header: DemoHeader {
            env: env.name.clone(),
            seed,
        },
        n_states: env.mdp.n_states(),
        n_actions: env.mdp.n_actions(),
        transitions,
    })
}

/// Budget and target for training a continuous expert with SAC on the true reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpertTraining {
    pub max_steps: usize,
    /// Mean discounted evaluation return that ends training.
    pub return_threshold: f64,
    pub warmup_steps: usize,
    pub batch: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub sac: NeuralConfig,
}

impl Default for ExpertTraining {
    fn default() -> Self {
        Self {
            max_steps: 40_000,
            return_threshold: -40.0,
            warmup_steps: 1_000,
            batch: 64,
            eval_every: 2_000,
            eval_episodes: 10,
            sac: NeuralConfig {
                sac_hidden: vec![32, 32],
                ..NeuralConfig::default()
            },
        }
    }
}

fn sac_config(n: &NeuralConfig, discount: f64) -> SacConfig {
    SacConfig {
        hidden: n.sac_hidden.clone(),
        alpha: n.sac_alpha,
        discount,
        tau: n.sac_tau,
        lr: n.sac_lr,
        clip_norm: (n.clip_norm > 0.0).then_some(n.clip_norm),
    }
}

/// Trains SAC on the true reward until its mean-action return reaches the threshold,
/// then records `n_episodes` stochastic-policy episodes.
pub fn generate_expert_continuous(
    env: &ContinuousEnv,
    name: &str,
    seed: u64,
    n_episodes: usize,
    training: &ExpertTraining,
) -> Result<Demonstrations, MeairlError> {
    if n_episodes == 0 {
        return Err(MeairlError::Config("n_episodes must be at least 1".into()));
    }
    let mut init_rng = stream(seed, streams::INIT);
    let mut env_rng = stream(seed, streams::ENV);
    let mut act_rng = stream(seed, streams::ACTION);
    let mut batch_rng = stream(seed, streams::POLICY_BATCH);
    let mut eval_rng = stream(seed, streams::EVAL);
    let cfg = sac_config(&training.sac, env.discount);
    let mut agent = SacAgent::new(
        env.state_dim,
        env.action_low.clone(),
        env.action_high.clone(),
        &cfg,
        &mut init_rng,
    );
    let mut buffer: ReplayBuffer<SacTransition> = ReplayBuffer::new(100_000);
    let mut state = env.reset(&mut env_rng);
    let mut t_ep = 0;
    let mut best = f64::NEG_INFINITY;
    let mut reached = false;
    for step in 0..training.max_steps {
        let action = if step < training.warmup_steps {
            env.action_low
                .iter()
                .zip(&env.action_high)
                .map(|(lo, hi)| act_rng.random_range(*lo..=*hi))
                .collect()
        } else {
            agent
                .sample_action(&state, &mut act_rng)
                .map_err(at(step))?
                .0
        };
        let next = env.step(&state, &action, &mut env_rng);
        buffer.push(SacTransition {
            reward: env.reward(&state, &action),
            state,
            action,
            next: next.clone(),
            done: false,
        });
        state = next;
        t_ep += 1;
        if t_ep == env.horizon {
            state = env.reset(&mut env_rng);
            t_ep = 0;
        }
        if step >= training.warmup_steps {
            let batch = buffer.sample(training.batch, &mut batch_rng);
            agent.update(&batch, &mut batch_rng).map_err(at(step))?;
        }
        if (step + 1) % training.eval_every == 0 {
            let returns = eval_continuous(env, &agent, training.eval_episodes, &mut eval_rng)
                .map_err(at(step))?;
            let (m, _) = mean_std(&returns);
            best = best.max(m);
            if m >= training.return_threshold {
                reached = true;
                break;
            }
        }
    }
    if !reached {
        return Err(MeairlError::ExpertThreshold {
            threshold: training.return_threshold,
            budget: training.max_steps,
            best,
        });
    }
    let mut rng = stream(seed, streams::ROLLOUT);
    let mut transitions = Vec::with_capacity(n_episodes * env.horizon);
    for episode in 0..n_episodes {
        let mut s = env.reset(&mut rng);
        for t in 0..env.horizon {
            let a = agent
                .sample_action(&s, &mut rng)
                .map_err(at(training.max_steps))?
                .0;
            let next = env.step(&s, &a, &mut rng);
            transitions.push(ContinuousTransition {
                episode,
                t,
                state: s,
                action: a,
                next: next.clone(),
            });
            s = next;
        }
    }
    Ok(Demonstrations::Continuous {
        header: DemoHeader {
            env: name.to_string(),
            seed,
        },
        state_dim: env.state_dim,
        action_dim: env.action_dim(),
        transitions,
    })
}

fn eval_tabular(
    env: &TabularEnv,
    policy: &TabularPolicy,
    episodes: usize,
    rng: &mut SeededRng,
) -> Vec<f64> {
    let g = env.mdp.discount();
    (0..episodes)
        .map(|_| {
            let mut s = env.mdp.sample_initial(rng);
            let mut ret = 0.0;
            let mut disc = 1.0;
            for _ in 0..env.horizon {
                let a = policy.greedy(s);
                ret += disc * env.mdp.reward_at(s, a);
                disc *= g;
                s = env.mdp.sample_next(s, a, rng);
            }
            ret
        })
        .collect()
}

fn eval_continuous(
    env: &ContinuousEnv,
    agent: &SacAgent,
    episodes: usize,
    rng: &mut SeededRng,
) -> Result<Vec<f64>, NeuralError> {
    eval_continuous_with(env, |s| agent.mean_action(s), episodes, rng)
}

fn eval_continuous_with<F>(
    env: &ContinuousEnv,
    mut act: F,
    episodes: usize,
    rng: &mut SeededRng,
) -> Result<Vec<f64>, NeuralError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, NeuralError>,
{
    let mut out = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut s = env.reset(rng);
        let mut ret = 0.0;
        let mut disc = 1.0;
        for _ in 0..env.horizon {
            let a = act(&s)?;
            ret += disc * env.reward(&s, &a);
            disc *= env.discount;
            s = env.step(&s, &a, rng);
        }
        out.push(ret);
    }
    Ok(out)
}

/// Running means between evaluation points.
#[derive(Default)]
struct Window {
    disc_loss: f64,
    disc_n: usize,
    nll: f64,
    nll_n: usize,
}

impl Window {
    fn disc(&self) -> f64 {
        if self.disc_n == 0 {
            f64::NAN
        } else {
            self.disc_loss / self.disc_n as f64
        }
    }

    fn nll(&self) -> f64 {
        if self.nll_n == 0 {
            f64::NAN
        } else {
            self.nll / self.nll_n as f64
        }
    }
}

fn check_finite(
    step: usize,
    what: &'static str,
    x: f64,
    snapshot: impl FnOnce() -> String,
) -> Result<(), MeairlError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(MeairlError::NonFinite {
            step,
            what,
            snapshot: snapshot(),
        })
    }
}

/// Result of a tabular run.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularOutcome {
    pub record: TrainingRecord,
    pub q: Vec<f64>,
    pub disc_params: Vec<f64>,
    /// Number of applied actions chosen from a model-predicted state.
    pub mixed_actions: usize,
}

impl TabularOutcome {
    pub fn greedy_policy(&self, n_states: usize, n_actions: usize) -> TabularPolicy {
        let actions: Vec<usize> = (0..n_states)
            .map(|s| crate::mdp::argmax(&self.q[s * n_actions..(s + 1) * n_actions]))
            .collect();
        TabularPolicy::deterministic(n_actions, &actions).expect("actions in range")
    }
}

/// Runs the loop on a tabular environment with a count-based transition model and a
/// soft Q-learner. The learner's reward is the discriminator output `f`; its
/// temperature-1 soft backup supplies the entropy term. `eps_T` is the
/// visitation-weighted row TV between the learned and true kernels.
pub fn run_meairl_tabular(
    env: &TabularEnv,
    expert: &ExpertBuffer<TabularSample>,
    cfg: &TrainingConfig,
) -> Result<TabularOutcome, MeairlError> {
    cfg.validate()?;
    let mdp = &env.mdp;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    if let Some(&(s, a, n)) = expert
        .items()
        .iter()
        .find(|&&(s, a, n)| s >= ns || a >= na || n >= ns)
    {
        return Err(MeairlError::Config(format!(
            "expert transition ({s},{a},{n}) outside the MDP"
        )));
    }
    let seed = cfg.seed;
    let mut env_rng = stream(seed, streams::ENV);
    let mut act_rng = stream(seed, streams::ACTION);
    let mut disc_rng = stream(seed, streams::DISC_BATCH);
    let mut batch_rng = stream(seed, streams::POLICY_BATCH);
    let mut roll_rng = stream(seed, streams::ROLLOUT);
    let mut mix_rng = stream(seed, streams::MIX);
    let mut eval_rng = stream(seed, streams::EVAL);

    let mut d_env: ReplayBuffer<TabularSample> = ReplayBuffer::new(cfg.env_capacity);
    let mut d_gen: ReplayBuffer<TabularSample> = ReplayBuffer::new(cfg.schedule.gen_capacity(0));
    let mut model = TabularDynamicsEstimate::new(ns, na, cfg.model_alpha).map_err(at(0))?;
    let mut kernel = model.kernel();
    let mut visits = vec![0.0; ns * na];
    let mut disc = TabularDiscriminator::new(ns, na, mdp.discount(), cfg.shaping, cfg.disc_lr);
    let mut learner = SoftQLearner::new(ns, na, mdp.discount(), cfg.temperature, cfg.policy_lr);
    let ramp = cfg.ramp();

    let mut record = TrainingRecord::default();
    let mut window = Window::default();
    let mut last_fraction = 0.0;
    let mut mixed_actions = 0;
    let mut s = mdp.sample_initial(&mut env_rng);
    let mut t_ep = 0;
    let mut prev: Option<(usize, usize)> = None;

    for step in 0..cfg.total_steps {
        let training = step >= cfg.starting_step;
        let mix_p = if training { cfg.mix_prob } else { 0.0 };
        let (a, mixed) = mix_action(
            &s,
            prev.as_ref().map(|(ps, pa)| (ps, pa)),
            mix_p,
            |ps, pa, r| sample_index(kernel.row(*ps, *pa), r),
            |st, r| learner.sample_action(*st, r),
            &mut mix_rng,
            &mut act_rng,
        );
        mixed_actions += mixed as usize;
        let next = mdp.sample_next(s, a, &mut env_rng);
        window.nll -= kernel.prob(s, a, next).ln();
        window.nll_n += 1;
        d_env.push((s, a, next));
        model.observe(s, a, next).map_err(at(step))?;
        visits[s * na + a] += 1.0;
        prev = Some((s, a));
        s = next;
        t_ep += 1;
        if t_ep == env.horizon {
            s = mdp.sample_initial(&mut env_rng);
            t_ep = 0;
            prev = None;
        }
        if step % cfg.model_update_period == 0 {
            kernel = model.kernel();
        }

        if training {
            let t = step - cfg.starting_step;
            for _ in 0..cfg.disc_updates_per_step {
                let with_log_pi = |&(s, a, next): &TabularSample| TabularDiscSample {
                    s,
                    a,
                    next,
                    log_pi: learner.log_prob(s, a),
                };
                let ex: Vec<TabularDiscSample> = expert
                    .sample(cfg.disc_batch, &mut disc_rng)
                    .iter()
                    .map(with_log_pi)
                    .collect();
                let n_syn = if cfg.disc_uses_synthetic && !d_gen.is_empty() {
                    cfg.schedule.synthetic_count(cfg.disc_batch, t, ramp)
                } else {
                    0
                };
                let mut pol = d_env.sample(cfg.disc_batch - n_syn, &mut disc_rng);
                pol.extend(d_gen.sample(n_syn, &mut disc_rng));
                let pol: Vec<TabularDiscSample> = pol.iter().map(with_log_pi).collect();
                let out = disc.train_step(&ex, &pol, &kernel).map_err(at(step))?;
                check_finite(step, "discriminator loss", out.loss, || {
                    format!(
                        "d_expert={} d_policy={}",
                        out.mean_d_expert, out.mean_d_policy
                    )
                })?;
                window.disc_loss += out.loss;
                window.disc_n += 1;
            }

            if cfg.synthetic && t % cfg.model_update_period == 0 {
                let policy = learner.policy();
                let starts: Vec<usize> = d_env
                    .sample(cfg.rollouts_per_update, &mut roll_rng)
                    .into_iter()
                    .map(|(s, _, _)| s)
                    .collect();
                for x in rollout_synthetic_tabular_with(
                    &kernel,
                    &policy,
                    &starts,
                    cfg.rollout_horizon,
                    &mut roll_rng,
                ) {
                    d_gen.push(x);
                }
                d_gen.set_capacity(cfg.schedule.gen_capacity(t));
            }

            let f = match cfg.shaping {
                FMode::Model => Some(disc.f_table(&kernel)),
                FMode::Sample => None,
            };
            for _ in 0..cfg.policy_updates_per_step {
                let n_syn = if cfg.synthetic && !d_gen.is_empty() {
                    cfg.schedule.synthetic_count(cfg.policy_batch, t, ramp)
                } else {
                    0
                };
                let mut batch = d_env.sample(cfg.policy_batch - n_syn, &mut batch_rng);
                batch.extend(d_gen.sample(n_syn, &mut batch_rng));
                last_fraction = n_syn as f64 / batch.len().max(1) as f64;
                let rewarded: Vec<(usize, usize, f64, usize)> = batch
                    .iter()
                    .map(|&(s, a, next)| {
                        let r = match &f {
                            Some(table) => table[s * na + a],
                            None => disc.f_value(s, a, next, &kernel),
                        };
                        (s, a, r, next)
                    })
                    .collect();
                let td = learner.update(&rewarded);
                check_finite(step, "policy TD error", td, || {
                    format!(
                        "max |Q| = {}",
                        learner.q().iter().fold(0.0f64, |m, q| m.max(q.abs()))
                    )
                })?;
            }
        }

        if (step + 1) % cfg.eval_every == 0 {
            let returns = eval_tabular(
                env,
                &learner.greedy_policy(),
                cfg.eval_episodes,
                &mut eval_rng,
            );
            let (return_mean, return_std) = mean_std(&returns);
            let total: f64 = visits.iter().sum();
            let weights: Vec<f64> = visits.iter().map(|v| v / total).collect();
            let eps_t = tv_distance(mdp.kernel(), &kernel, Some(&weights)).weighted;
            record.rows.push(RecordRow {
                step: step + 1,
                return_mean,
                return_std,
                disc_loss: window.disc(),
                model_nll: window.nll(),
                eps_t,
                synthetic_fraction: last_fraction,
            });
            window = Window::default();
        }
    }
    Ok(TabularOutcome {
        record,
        q: learner.q().to_vec(),
        disc_params: disc.params(),
        mixed_actions,
    })
}

/// Behaviour cloning on tabular demonstrations: Laplace-smoothed action counts per
/// state. The record repeats the greedy policy's evaluation at every evaluation
/// point of the budget.
pub fn run_behavior_cloning_tabular(
    env: &TabularEnv,
    expert: &ExpertBuffer<TabularSample>,
    cfg: &TrainingConfig,
) -> Result<(TrainingRecord, TabularPolicy), MeairlError> {
    cfg.validate()?;
    let (ns, na) = (env.mdp.n_states(), env.mdp.n_actions());
    let mut counts = vec![1.0; ns * na];
    for &(s, a, _) in expert.items() {
        if s >= ns || a >= na {
            return Err(MeairlError::Config(format!(
                "expert transition ({s},{a}) outside the MDP"
            )));
        }
        counts[s * na + a] += 1.0;
    }
    let policy = TabularPolicy::from_unnormalized(ns, na, counts).expect("positive counts");
    let mut eval_rng = stream(cfg.seed, streams::EVAL);
    let mut record = TrainingRecord::default();
    for k in 1..=cfg.total_steps / cfg.eval_every {
        let returns = eval_tabular(env, &policy, cfg.eval_episodes, &mut eval_rng);
        let (return_mean, return_std) = mean_std(&returns);
        record.rows.push(RecordRow {
            step: k * cfg.eval_every,
            return_mean,
            return_std,
            disc_loss: f64::NAN,
            model_nll: f64::NAN,
            eps_t: f64::NAN,
            synthetic_fraction: 0.0,
        });
    }
    Ok((record, policy))
}

/// Result of a continuous run.
#[derive(Debug, Clone)]
pub struct ContinuousOutcome {
    pub record: TrainingRecord,
    pub agent: SacAgent,
    pub discriminator: NeuralDiscriminator,
    pub model: GaussianDynamicsModel,
    /// `(step, checkpoint text)` pairs in the `neural` checkpoint format.
    pub checkpoints: Vec<(usize, String)>,
    pub mixed_actions: usize,
}

/// Mean Gaussian TV between the model and a one-dimensional environment on sampled
/// buffer pairs; NaN for noiseless or multi-dimensional environments.
fn continuous_eps_t(
    env: &ContinuousEnv,
    model: &GaussianDynamicsModel,
    samples: &[ContinuousSample],
) -> Result<f64, DynamicsError> {
    if env.state_dim != 1 || env.dynamics_noise_std <= 0.0 || samples.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for x in samples {
        let p = model.predict(&x.state, &x.action)?;
        let true_mean = env.mean_next(&x.state, &x.action)[0];
        total += gaussian_tv_1d(
            x.state[0] + p.mean[0],
            p.std()[0],
            true_mean,
            env.dynamics_noise_std,
        );
    }
    Ok(total / samples.len() as f64)
}

/// Runs the loop on a continuous environment with a Gaussian transition model, a
/// neural discriminator and SAC on the extracted reward `f - log π`. `eps_T` is the
/// mean Gaussian TV on buffer samples (NaN when it is not defined).
pub fn run_meairl_continuous(
    env: &ContinuousEnv,
    expert: &ExpertBuffer<ContinuousSample>,
    cfg: &TrainingConfig,
) -> Result<ContinuousOutcome, MeairlError> {
    cfg.validate()?;
    let (sd, ad) = (env.state_dim, env.action_dim());
    if let Some(x) = expert
        .items()
        .iter()
        .find(|x| x.state.len() != sd || x.action.len() != ad || x.next.len() != sd)
    {
        return Err(MeairlError::Config(format!(
            "expert transition dimensions ({}, {}, {}) do not match the environment",
            x.state.len(),
            x.action.len(),
            x.next.len()
        )));
    }
    let seed = cfg.seed;
    let n = &cfg.neural;
    let mut init_rng = stream(seed, streams::INIT);
    let mut env_rng = stream(seed, streams::ENV);
    let mut act_rng = stream(seed, streams::ACTION);
    let mut disc_rng = stream(seed, streams::DISC_BATCH);
    let mut batch_rng = stream(seed, streams::POLICY_BATCH);
    let mut roll_rng = stream(seed, streams::ROLLOUT);
    let mut mix_rng = stream(seed, streams::MIX);
    let mut eval_rng = stream(seed, streams::EVAL);
    let mut model_rng = stream(seed, streams::MODEL_BATCH);

    let mut model =
        GaussianDynamicsModel::new(sd, ad, &n.model_hidden, env.state_bound, &mut init_rng)
            .with_optimizer(
                n.model_lr,
                if n.clip_norm > 0.0 {
                    n.clip_norm
                } else {
                    f64::INFINITY
                },
            );
    let mut disc = NeuralDiscriminator::new(
        sd,
        ad,
        &n.disc_hidden,
        env.discount,
        cfg.shaping,
        cfg.n_model_samples,
        cfg.disc_lr,
        &mut init_rng,
    );
    let mut agent = SacAgent::new(
        sd,
        env.action_low.clone(),
        env.action_high.clone(),
        &sac_config(n, env.discount),
        &mut init_rng,
    );
    let mut d_env: ReplayBuffer<ContinuousSample> = ReplayBuffer::new(cfg.env_capacity);
    let mut d_gen: ReplayBuffer<ContinuousSample> = ReplayBuffer::new(cfg.schedule.gen_capacity(0));
    let ramp = cfg.ramp();

    let mut record = TrainingRecord::default();
    let mut window = Window::default();
    let mut checkpoints = Vec::new();
    let mut last_fraction = 0.0;
    let mut mixed_actions = 0;
    let mut state = env.reset(&mut env_rng);
    let mut t_ep = 0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;

    for step in 0..cfg.total_steps {
        let training = step >= cfg.starting_step;
        let mix_p = if training { cfg.mix_prob } else { 0.0 };
        let mut model_failure: Option<ComponentError> = None;
        let mut agent_failure: Option<ComponentError> = None;
        let (action, mixed) = mix_action(
            &state,
            prev.as_ref().map(|(ps, pa)| (ps, pa)),
            mix_p,
            |ps: &Vec<f64>, pa: &Vec<f64>, r| {
                model.sample_next(ps, pa, r).unwrap_or_else(|e| {
                    model_failure = Some(e.into());
                    ps.clone()
                })
            },
            |st: &Vec<f64>, r| match agent.sample_action(st, r) {
                Ok((a, _)) => a,
                Err(e) => {
                    agent_failure.get_or_insert(e.into());
                    vec![0.0; ad]
                }
            },
            &mut mix_rng,
            &mut act_rng,
        );
        if let Some(e) = model_failure.or(agent_failure) {
            return Err(MeairlError::Component { step, source: e });
        }
        mixed_actions += mixed as usize;
        let action = env.clip_action(&action);
        let next = env.step(&state, &action, &mut env_rng);
        let sample = ContinuousSample {
            state: state.clone(),
            action: action.clone(),
            next: next.clone(),
        };
        let (nll, _) = crate::dynamics::gaussian_nll_loss(&model, std::slice::from_ref(&sample))
            .map_err(at(step))?;
        window.nll += nll;
        window.nll_n += 1;
        d_env.push(sample);
        prev = Some((state, action));
        state = next;
        t_ep += 1;
        if t_ep == env.horizon {
            state = env.reset(&mut env_rng);
            t_ep = 0;
            prev = None;
        }
        if step % cfg.model_update_period == 0 {
            let batch = d_env.sample(n.model_batch, &mut model_rng);
            let loss = model.train_step(&batch).map_err(at(step))?;
            check_finite(step, "model loss", loss, || {
                format!("buffer size {}", d_env.len())
            })?;
        }

        if training {
            let t = step - cfg.starting_step;
            for _ in 0..cfg.disc_updates_per_step {
                let n_syn = if cfg.disc_uses_synthetic && !d_gen.is_empty() {
                    cfg.schedule.synthetic_count(cfg.disc_batch, t, ramp)
                } else {
                    0
                };
                let ex_raw = expert.sample(cfg.disc_batch, &mut disc_rng);
                let mut pol_raw = d_env.sample(cfg.disc_batch - n_syn, &mut disc_rng);
                pol_raw.extend(d_gen.sample(n_syn, &mut disc_rng));
                let mut to_disc =
                    |x: &ContinuousSample| -> Result<NeuralDiscSample, ComponentError> {
                        Ok(NeuralDiscSample {
                            successors: disc.successors(
                                &x.state,
                                &x.action,
                                &x.next,
                                Some(&model),
                                &mut disc_rng,
                            )?,
                            log_pi: agent.log_prob(&x.state, &x.action)?,
                            state: x.state.clone(),
                            action: x.action.clone(),
                        })
                    };
                let ex: Vec<NeuralDiscSample> = ex_raw
                    .iter()
                    .map(&mut to_disc)
                    .collect::<Result<_, _>>()
                    .map_err(at(step))?;
                let pol: Vec<NeuralDiscSample> = pol_raw
                    .iter()
                    .map(&mut to_disc)
                    .collect::<Result<_, _>>()
                    .map_err(at(step))?;
                let out = disc.train_step(&ex, &pol).map_err(at(step))?;
                check_finite(step, "discriminator loss", out.loss, || {
                    format!(
                        "d_expert={} d_policy={}",
                        out.mean_d_expert, out.mean_d_policy
                    )
                })?;
                window.disc_loss += out.loss;
                window.disc_n += 1;
            }

            if cfg.synthetic && t % cfg.model_update_period == 0 {
                let starts: Vec<Vec<f64>> = d_env
                    .sample(cfg.rollouts_per_update, &mut roll_rng)
                    .into_iter()
                    .map(|x| x.state)
                    .collect();
                let mut failure: Option<NeuralError> = None;
                let rollouts = rollout_synthetic_continuous_with(
                    &model,
                    |s, r| match agent.sample_action(s, r) {
                        Ok((a, _)) => a,
                        Err(e) => {
                            failure.get_or_insert(e);
                            vec![0.0; ad]
                        }
                    },
                    &starts,
                    cfg.rollout_horizon,
                    &mut roll_rng,
                )
                .map_err(at(step))?;
                if let Some(e) = failure {
                    return Err(at(step)(e));
                }
                for x in rollouts {
                    d_gen.push(x);
                }
                d_gen.set_capacity(cfg.schedule.gen_capacity(t));
            }

            for _ in 0..cfg.policy_updates_per_step {
                let n_syn = if cfg.synthetic && !d_gen.is_empty() {
                    cfg.schedule.synthetic_count(cfg.policy_batch, t, ramp)
                } else {
                    0
                };
                let mut raw = d_env.sample(cfg.policy_batch - n_syn, &mut batch_rng);
                raw.extend(d_gen.sample(n_syn, &mut batch_rng));
                last_fraction = n_syn as f64 / raw.len().max(1) as f64;
                let mut batch = Vec::with_capacity(raw.len());
                for x in raw {
                    let succ = disc
                        .successors(&x.state, &x.action, &x.next, Some(&model), &mut batch_rng)
                        .map_err(at(step))?;
                    let f = disc.f_value(&x.state, &x.action, &succ).map_err(at(step))?;
                    let log_pi = agent.log_prob(&x.state, &x.action).map_err(at(step))?;
                    batch.push(SacTransition {
                        reward: extract_reward(f, log_pi),
                        state: x.state,
                        action: x.action,
                        next: x.next,
                        done: false,
                    });
                }
                let diag = agent.update(&batch, &mut batch_rng).map_err(at(step))?;
                check_finite(step, "critic loss", diag.critic_loss, || {
                    format!("actor loss {} entropy {}", diag.actor_loss, diag.entropy)
                })?;
                check_finite(step, "actor loss", diag.actor_loss, || {
                    format!("critic loss {}", diag.critic_loss)
                })?;
            }
        }

        if (step + 1) % cfg.eval_every == 0 {
            let returns =
                eval_continuous(env, &agent, cfg.eval_episodes, &mut eval_rng).map_err(at(step))?;
            let (return_mean, return_std) = mean_std(&returns);
            let probe = d_env.sample(32, &mut eval_rng);
            let eps_t = continuous_eps_t(env, &model, &probe).map_err(at(step))?;
            record.rows.push(RecordRow {
                step: step + 1,
                return_mean,
                return_std,
                disc_loss: window.disc(),
                model_nll: window.nll(),
                eps_t,
                synthetic_fraction: last_fraction,
            });
            window = Window::default();
        }
        if cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 {
            checkpoints.push((
                step + 1,
                write_checkpoint(&[
                    ("actor", &agent.actor),
                    ("critic", &agent.critic),
                    ("disc_reward", disc.r_net()),
                    ("disc_potential", disc.phi_net()),
                    ("model_mean", model.mean_net()),
                    ("model_log_std", model.log_std_net()),
                ]),
            ));
        }
    }
    Ok(ContinuousOutcome {
        record,
        agent,
        discriminator: disc,
        model,
        checkpoints,
        mixed_actions,
    })
}

/// Behaviour cloning on continuous demonstrations: a tanh-squashed MLP regressed on
/// expert actions by mean squared error, one Adam step per budget step.
pub fn run_behavior_cloning_continuous(
    env: &ContinuousEnv,
    expert: &ExpertBuffer<ContinuousSample>,
    cfg: &TrainingConfig,
) -> Result<(TrainingRecord, Mlp), MeairlError> {
    cfg.validate()?;
    let (sd, ad) = (env.state_dim, env.action_dim());
    let mut init_rng = stream(cfg.seed, streams::INIT);
    let mut batch_rng = stream(cfg.seed, streams::POLICY_BATCH);
    let mut eval_rng = stream(cfg.seed, streams::EVAL);
    let mut sizes = vec![sd];
    sizes.extend(&cfg.neural.sac_hidden);
    sizes.push(ad);
    let mut net = Mlp::new(&sizes, Activation::Tanh, &mut init_rng);
    let mut adam = AdamState::new(net.n_params(), cfg.neural.sac_lr);
    let centre: Vec<f64> = env
        .action_low
        .iter()
        .zip(&env.action_high)
        .map(|(l, h)| 0.5 * (l + h))
        .collect();
    let half: Vec<f64> = env
        .action_low
        .iter()
        .zip(&env.action_high)
        .map(|(l, h)| 0.5 * (h - l))
        .collect();
    let scale = |y: &[f64]| -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(d, v)| centre[d] + half[d] * v)
            .collect()
    };
    let mut record = TrainingRecord::default();
    for step in 0..cfg.total_steps {
        let batch = expert.sample(cfg.policy_batch, &mut batch_rng);
        let mut grad = vec![0.0; net.n_params()];
        let mut loss = 0.0;
        let nb = batch.len() as f64;
        for x in &batch {
            let tape = net.forward_tape(&x.state).map_err(at(step))?;
            let pred = scale(tape.output());
            let up: Vec<f64> = (0..ad)
                .map(|d| 2.0 * (pred[d] - x.action[d]) * half[d] / nb)
                .collect();
            loss += pred
                .iter()
                .zip(&x.action)
                .map(|(p, a)| (p - a).powi(2))
                .sum::<f64>()
                / nb;
            net.backward(&tape, &up, &mut grad);
        }
        check_finite(step, "behaviour cloning loss", loss, || {
            format!("batch {}", batch.len())
        })?;
        let mut p = net.params().to_vec();
        adam.step(&mut p, &grad, cfg.clip());
        net.set_params(&p);
        if (step + 1) % cfg.eval_every == 0 {
            let returns = eval_continuous_with(
                env,
                |s| Ok(scale(&net.forward(s)?)),
                cfg.eval_episodes,
                &mut eval_rng,
            )
            .map_err(at(step))?;
            let (return_mean, return_std) = mean_std(&returns);
            record.rows.push(RecordRow {
                step: step + 1,
                return_mean,
                return_std,
                disc_loss: f64::NAN,
                model_nll: f64::NAN,
                eps_t: f64::NAN,
                synthetic_fraction: 0.0,
            });
        }
    }
    Ok((record, net))
}
