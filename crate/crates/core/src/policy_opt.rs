//! Policy optimisation against a given reward: exact soft policy computation and a
//! soft Q-learner for tabular problems, a minimal soft actor-critic for continuous ones.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::mdp::{argmax, TabularMdp, TabularPolicy};
use crate::neural::{Activation, AdamState, Mlp, NeuralError};
use crate::soft_dp::{
    logsumexp, soft_optimal_policy, soft_value_iteration, DpError, ORACLE_MAX_ITERS,
};

/// Soft-optimal policy for `reward` on the dynamics of `mdp` (its own reward is ignored).
pub fn soft_policy_update_tabular(
    mdp: &TabularMdp,
    reward: &[f64],
    tol: f64,
) -> Result<TabularPolicy, DpError> {
    let m = mdp
        .with_reward(reward.to_vec())
        .map_err(|e| DpError::Argument(e.to_string()))?;
    Ok(soft_optimal_policy(&soft_value_iteration(
        &m,
        tol,
        ORACLE_MAX_ITERS,
    )?))
}

/// Sample-based soft Q-learning on a table.
///
/// The TD target of `(s, a, r, s')` is `r + γ·τ·log Σ_b exp(Q(s',b)/τ)`, and the
/// policy is `softmax(Q(s,·)/τ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftQLearner {
    n_states: usize,
    n_actions: usize,
    discount: f64,
    temperature: f64,
    lr: f64,
    q: Vec<f64>,
}

impl SoftQLearner {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        discount: f64,
        temperature: f64,
        lr: f64,
    ) -> Self {
        Self {
            n_states,
            n_actions,
            discount,
            temperature,
            lr,
            q: vec![0.0; n_states * n_actions],
        }
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn soft_value(&self, s: usize) -> f64 {
        let t = self.temperature;
        let row: Vec<f64> = self.q_row(s).iter().map(|q| q / t).collect();
        t * logsumexp(&row)
    }

    fn q_row(&self, s: usize) -> &[f64] {
        &self.q[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn log_prob(&self, s: usize, a: usize) -> f64 {
        (self.q[s * self.n_actions + a] - self.soft_value(s)) / self.temperature
    }

    pub fn policy(&self) -> TabularPolicy {
        let mut probs = Vec::with_capacity(self.q.len());
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                probs.push(self.log_prob(s, a).exp());
            }
        }
        TabularPolicy::from_unnormalized(self.n_states, self.n_actions, probs)
            .expect("softmax rows are distributions")
    }

    pub fn greedy_policy(&self) -> TabularPolicy {
        let actions: Vec<usize> = (0..self.n_states).map(|s| argmax(self.q_row(s))).collect();
        TabularPolicy::deterministic(self.n_actions, &actions).expect("actions in range")
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        let probs: Vec<f64> = (0..self.n_actions)
            .map(|a| self.log_prob(s, a).exp())
            .collect();
        crate::mdp::sample_index(&probs, rng)
    }

    /// One TD step per transition; returns the mean absolute TD error.
    pub fn update(&mut self, batch: &[(usize, usize, f64, usize)]) -> f64 {
        let mut err = 0.0;
        for &(s, a, r, next) in batch {
            let target = r + self.discount * self.soft_value(next);
            let i = s * self.n_actions + a;
            let td = target - self.q[i];
            self.q[i] += self.lr * td;
            err += td.abs();
        }
        err / batch.len().max(1) as f64
    }
}

pub const SAC_ALPHA: f64 = 0.2;
pub const SAC_TAU: f64 = 0.005;
pub const SAC_BATCH: usize = 256;
pub const SAC_LR: f64 = 3e-4;
pub const ACTOR_LOG_STD_MIN: f64 = -5.0;
pub const ACTOR_LOG_STD_MAX: f64 = 2.0;

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_8;
const LN_2: f64 = std::f64::consts::LN_2;

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// `log(1 − tanh²u)`, stable for large `|u|`.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (LN_2 - u - softplus(-2.0 * u))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SacTransition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SacDiagnostics {
    pub critic_loss: f64,
    pub actor_loss: f64,
    /// Monte Carlo entropy estimate `−mean log π` over the batch.
    pub entropy: f64,
}

/// Hyperparameters of [`SacAgent`].
#[derive(Debug, Clone, PartialEq)]
pub struct SacConfig {
    pub hidden: Vec<usize>,
    pub alpha: f64,
    pub discount: f64,
    pub tau: f64,
    pub lr: f64,
    pub clip_norm: Option<f64>,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            alpha: SAC_ALPHA,
            discount: 0.99,
            tau: SAC_TAU,
            lr: SAC_LR,
            clip_norm: Some(10.0),
        }
    }
}

/// Squashed-Gaussian actor, single critic with a Polyak-averaged target.
#[derive(Debug, Clone)]
pub struct SacAgent {
    state_dim: usize,
    action_dim: usize,
    action_low: Vec<f64>,
    action_high: Vec<f64>,
    pub actor: Mlp,
    pub critic: Mlp,
    pub target: Mlp,
    alpha: f64,
    discount: f64,
    tau: f64,
    clip_norm: Option<f64>,
    actor_adam: AdamState,
    critic_adam: AdamState,
}

/// One reparameterised action draw with everything the gradients need.
struct ActorDraw {
    u: Vec<f64>,
    log_std: Vec<f64>,
    raw_log_std: Vec<f64>,
    action: Vec<f64>,
    log_prob: f64,
}

impl SacAgent {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_low: Vec<f64>,
        action_high: Vec<f64>,
        config: &SacConfig,
        rng: &mut R,
    ) -> Self {
        let action_dim = action_low.len();
        let mut actor_sizes = vec![state_dim];
        actor_sizes.extend_from_slice(&config.hidden);
        actor_sizes.push(2 * action_dim);
        let mut critic_sizes = vec![state_dim + action_dim];
        critic_sizes.extend_from_slice(&config.hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, Activation::Identity, rng);
        let critic = Mlp::new(&critic_sizes, Activation::Identity, rng);
        let target = critic.clone();
        Self {
            state_dim,
            action_dim,
            actor_adam: AdamState::new(actor.n_params(), config.lr),
            critic_adam: AdamState::new(critic.n_params(), config.lr),
            action_low,
            action_high,
            actor,
            critic,
            target,
            alpha: config.alpha,
            discount: config.discount,
            tau: config.tau,
            clip_norm: config.clip_norm,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn scale(&self, d: usize) -> (f64, f64) {
        let center = 0.5 * (self.action_high[d] + self.action_low[d]);
        let half = 0.5 * (self.action_high[d] - self.action_low[d]);
        (center, half)
    }

    fn squash_log_std(raw: f64) -> f64 {
        ACTOR_LOG_STD_MIN + 0.5 * (ACTOR_LOG_STD_MAX - ACTOR_LOG_STD_MIN) * (raw.tanh() + 1.0)
    }

    fn d_log_std(raw: f64) -> f64 {
        let t = raw.tanh();
        0.5 * (ACTOR_LOG_STD_MAX - ACTOR_LOG_STD_MIN) * (1.0 - t * t)
    }

    fn draw(&self, out: &[f64], noise: &[f64]) -> ActorDraw {
        let ad = self.action_dim;
        let mut draw = ActorDraw {
            u: Vec::with_capacity(ad),
            log_std: Vec::with_capacity(ad),
            raw_log_std: Vec::with_capacity(ad),
            action: Vec::with_capacity(ad),
            log_prob: 0.0,
        };
        for d in 0..ad {
            let raw = out[ad + d];
            let ls = Self::squash_log_std(raw);
            let u = out[d] + ls.exp() * noise[d];
            let (c, k) = self.scale(d);
            let a = (c + k * u.tanh()).clamp(self.action_low[d], self.action_high[d]);
            draw.log_prob +=
                -0.5 * noise[d] * noise[d] - ls - HALF_LOG_2PI - k.ln() - log_one_minus_tanh_sq(u);
            draw.u.push(u);
            draw.log_std.push(ls);
            draw.raw_log_std.push(raw);
            draw.action.push(a);
        }
        draw
    }

    /// Reparameterised sample `a = c + k·tanh(μ + σ·ε)` for given `ε`, with its log-density.
    pub fn action_with_noise(
        &self,
        state: &[f64],
        noise: &[f64],
    ) -> Result<(Vec<f64>, f64), NeuralError> {
        let out = self.actor.forward(state)?;
        let d = self.draw(&out, noise);
        Ok((d.action, d.log_prob))
    }

    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        rng: &mut R,
    ) -> Result<(Vec<f64>, f64), NeuralError> {
        let noise: Vec<f64> = (0..self.action_dim)
            .map(|_| StandardNormal.sample(rng))
            .collect();
        self.action_with_noise(state, &noise)
    }

    /// Deterministic evaluation action `c + k·tanh(μ)`.
    pub fn mean_action(&self, state: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let out = self.actor.forward(state)?;
        Ok((0..self.action_dim)
            .map(|d| {
                let (c, k) = self.scale(d);
                c + k * out[d].tanh()
            })
            .collect())
    }

    /// Log-density of an arbitrary in-bounds action.
    pub fn log_prob(&self, state: &[f64], action: &[f64]) -> Result<f64, NeuralError> {
        let out = self.actor.forward(state)?;
        let mut lp = 0.0;
        for d in 0..self.action_dim {
            let (c, k) = self.scale(d);
            let y = ((action[d] - c) / k).clamp(-1.0 + 1e-6, 1.0 - 1e-6);
            let u = y.atanh();
            let ls = Self::squash_log_std(out[self.action_dim + d]);
            let z = (u - out[d]) / ls.exp();
            lp += -0.5 * z * z - ls - HALF_LOG_2PI - k.ln() - log_one_minus_tanh_sq(u);
        }
        Ok(lp)
    }

    fn q_value(net: &Mlp, state: &[f64], action: &[f64]) -> Result<f64, NeuralError> {
        let mut x = state.to_vec();
        x.extend_from_slice(action);
        Ok(net.forward(&x)?[0])
    }

    pub fn q(&self, state: &[f64], action: &[f64]) -> Result<f64, NeuralError> {
        Self::q_value(&self.critic, state, action)
    }

    /// `r + γ(1 − done)(Q_target(s', a') − α·log π(a'|s'))` with `a'` drawn using `next_noise`.
    pub fn critic_target(&self, t: &SacTransition, next_noise: &[f64]) -> Result<f64, NeuralError> {
        if t.done {
            return Ok(t.reward);
        }
        let (a, lp) = self.action_with_noise(&t.next, next_noise)?;
        let q = Self::q_value(&self.target, &t.next, &a)?;
        Ok(t.reward + self.discount * (q - self.alpha * lp))
    }

    /// `½·mean (Q(s,a) − y)²` and its critic-parameter gradient.
    pub fn critic_loss_and_grad(
        &self,
        batch: &[SacTransition],
        next_noise: &[Vec<f64>],
    ) -> Result<(f64, Vec<f64>), NeuralError> {
        let n = batch.len() as f64;
        let mut grad = vec![0.0; self.critic.n_params()];
        let mut loss = 0.0;
        for (t, eps) in batch.iter().zip(next_noise) {
            let y = self.critic_target(t, eps)?;
            let mut x = t.state.clone();
            x.extend_from_slice(&t.action);
            let tape = self.critic.forward_tape(&x)?;
            let r = tape.output()[0] - y;
            loss += 0.5 * r * r / n;
            self.critic.backward(&tape, &[r / n], &mut grad);
        }
        Ok((loss, grad))
    }

    /// `mean[α·log π(ã|s) − Q(s, ã)]` over reparameterised `ã`, its actor-parameter
    /// gradient, and the mean log-probability.
    pub fn actor_loss_and_grad(
        &self,
        states: &[Vec<f64>],
        noise: &[Vec<f64>],
    ) -> Result<(f64, Vec<f64>, f64), NeuralError> {
        let n = states.len() as f64;
        let ad = self.action_dim;
        let mut grad = vec![0.0; self.actor.n_params()];
        let mut critic_scratch = vec![0.0; self.critic.n_params()];
        let (mut loss, mut mean_lp) = (0.0, 0.0);
        for (s, eps) in states.iter().zip(noise) {
            let tape = self.actor.forward_tape(s)?;
            let d = self.draw(tape.output(), eps);
            let mut x = s.clone();
            x.extend_from_slice(&d.action);
            let ctape = self.critic.forward_tape(&x)?;
            let q = ctape.output()[0];
            let dq_dx = self.critic.backward(&ctape, &[1.0], &mut critic_scratch);
            loss += (self.alpha * d.log_prob - q) / n;
            mean_lp += d.log_prob / n;
            let mut up = vec![0.0; 2 * ad];
            for k in 0..ad {
                let (_, half) = self.scale(k);
                let t = d.u[k].tanh();
                let da_du = half * (1.0 - t * t);
                let dq_da = dq_dx[self.state_dim + k];
                let sigma = d.log_std[k].exp();
                // ∂/∂u of −log(1 − tanh²u) is 2·tanh(u).
                up[k] = (self.alpha * 2.0 * t - dq_da * da_du) / n;
                let d_logsig =
                    self.alpha * (-1.0 + 2.0 * t * sigma * eps[k]) - dq_da * da_du * sigma * eps[k];
                up[ad + k] = d_logsig * Self::d_log_std(d.raw_log_std[k]) / n;
            }
            self.actor.backward(&tape, &up, &mut grad);
        }
        Ok((loss, grad, mean_lp))
    }

    /// Move the target towards the critic: `θ' ← (1 − τ)θ' + τθ`.
    pub fn polyak_update(&mut self) {
        let tau = self.tau;
        let critic = self.critic.params().to_vec();
        for (t, c) in self.target.params_mut().iter_mut().zip(&critic) {
            *t = (1.0 - tau) * *t + tau * c;
        }
    }

    /// One critic step, one actor step, one Polyak step.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        batch: &[SacTransition],
        rng: &mut R,
    ) -> Result<SacDiagnostics, NeuralError> {
        let ad = self.action_dim;
        let draw =
            |rng: &mut R| -> Vec<f64> { (0..ad).map(|_| StandardNormal.sample(rng)).collect() };
        let next_noise: Vec<Vec<f64>> = batch.iter().map(|_| draw(rng)).collect();
        let (critic_loss, cg) = self.critic_loss_and_grad(batch, &next_noise)?;
        let mut p = self.critic.params().to_vec();
        self.critic_adam.step(&mut p, &cg, self.clip_norm);
        self.critic.set_params(&p);

        let states: Vec<Vec<f64>> = batch.iter().map(|t| t.state.clone()).collect();
        let noise: Vec<Vec<f64>> = batch.iter().map(|_| draw(rng)).collect();
        let (actor_loss, ag, mean_lp) = self.actor_loss_and_grad(&states, &noise)?;
        let mut p = self.actor.params().to_vec();
        self.actor_adam.step(&mut p, &ag, self.clip_norm);
        self.actor.set_params(&p);

        self.polyak_update();
        Ok(SacDiagnostics {
            critic_loss,
            actor_loss,
            entropy: -mean_lp,
        })
    }
}
