//! Discriminators that separate expert from policy transitions, reward extraction, and
//! exact tabular gradients for maximum-causal-entropy IRL.
//!
//! The discriminator logit is `f(s,a) − log π(a|s)` with
//! `f(s,a) = R(s,a) + γ·E[φ(s')] − φ(s)`. The expectation is taken under a learned
//! model ([`FMode::Model`]) or replaced by the observed successor ([`FMode::Sample`]).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{ContinuousSample, GaussianDynamicsModel, TabularSample};
use crate::mdp::{discounted_occupancy, Demonstrations, Kernel, MdpError, TabularMdp};
use crate::neural::{Activation, AdamState, Mlp, NeuralError};
use crate::rng::{sample_indices, SeededRng};
use crate::soft_dp::{soft_optimal_policy, soft_value_iteration, DpError, ORACLE_MAX_ITERS};

pub const PROB_CLAMP: f64 = 1e-6;
pub const REWARD_CLAMP: f64 = 50.0;
pub const DEFAULT_MODEL_SAMPLES: usize = 8;
pub const DEFAULT_HIDDEN: [usize; 2] = [100, 100];
pub const DEFAULT_LR: f64 = 3e-4;

#[derive(Debug, Error)]
pub enum AdversarialError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("expert buffer is empty")]
    EmptyExpertBuffer,
    #[error("demonstrations are {got}, expected {expected}")]
    DemoKind {
        expected: &'static str,
        got: &'static str,
    },
    #[error("occupancy has {got} entries, expected {expected}")]
    OccupancyShape { expected: usize, got: usize },
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynamicsError),
}

/// How the potential's successor term is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FMode {
    /// `γ·E_T̂[φ(s')|s,a]` under the learned dynamics.
    Model,
    /// `γ·φ(s')` at the observed successor.
    Sample,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `D = exp(f) / (exp(f) + π)`, evaluated as a logistic function of `f − log π`.
pub fn discriminator_prob(f: f64, log_pi: f64) -> f64 {
    sigmoid(f - log_pi)
}

/// [`discriminator_prob`] clamped to `[PROB_CLAMP, 1 − PROB_CLAMP]`.
pub fn clamped_prob(f: f64, log_pi: f64) -> f64 {
    discriminator_prob(f, log_pi).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `log D − log(1 − D) = f − log π`, clamped to `±REWARD_CLAMP`.
pub fn extract_reward(f: f64, log_pi: f64) -> f64 {
    (f - log_pi).clamp(-REWARD_CLAMP, REWARD_CLAMP)
}

/// Loss `−log D` on an expert sample and its derivative in the logit.
fn expert_term(z: f64) -> (f64, f64) {
    let d = sigmoid(z);
    if d < PROB_CLAMP {
        (-PROB_CLAMP.ln(), 0.0)
    } else if d > 1.0 - PROB_CLAMP {
        (-(1.0 - PROB_CLAMP).ln(), 0.0)
    } else {
        (-d.ln(), -sigmoid(-z))
    }
}

/// Loss `−log(1 − D)` on a policy sample and its derivative in the logit.
fn policy_term(z: f64) -> (f64, f64) {
    let d = sigmoid(z);
    if d < PROB_CLAMP {
        (-(1.0 - PROB_CLAMP).ln(), 0.0)
    } else if d > 1.0 - PROB_CLAMP {
        (-PROB_CLAMP.ln(), 0.0)
    } else {
        (-sigmoid(-z).ln(), d)
    }
}

/// Loss value and gradient of one discriminator evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscLoss {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub mean_d_expert: f64,
    pub mean_d_policy: f64,
}

/// Read-only buffer of expert transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertBuffer<T> {
    items: Vec<T>,
}

impl<T: Clone> ExpertBuffer<T> {
    pub fn new(items: Vec<T>) -> Result<Self, AdversarialError> {
        if items.is_empty() {
            return Err(AdversarialError::EmptyExpertBuffer);
        }
        Ok(Self { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<T> {
        sample_indices(self.items.len(), n, rng)
            .into_iter()
            .map(|i| self.items[i].clone())
            .collect()
    }
}

impl ExpertBuffer<TabularSample> {
    pub fn from_demonstrations(demos: &Demonstrations) -> Result<Self, AdversarialError> {
        match demos {
            Demonstrations::Tabular { transitions, .. } => {
                Self::new(transitions.iter().map(|t| (t.s, t.a, t.next)).collect())
            }
            Demonstrations::Continuous { .. } => Err(AdversarialError::DemoKind {
                expected: "tabular",
                got: "continuous",
            }),
        }
    }
}

impl ExpertBuffer<ContinuousSample> {
    pub fn from_demonstrations(demos: &Demonstrations) -> Result<Self, AdversarialError> {
        match demos {
            Demonstrations::Continuous { transitions, .. } => Self::new(
                transitions
                    .iter()
                    .map(|t| ContinuousSample {
                        state: t.state.clone(),
                        action: t.action.clone(),
                        next: t.next.clone(),
                    })
                    .collect(),
            ),
            Demonstrations::Tabular { .. } => Err(AdversarialError::DemoKind {
                expected: "continuous",
                got: "tabular",
            }),
        }
    }
}

/// Tabular discriminator input: a transition and the current policy's log-probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TabularDiscSample {
    pub s: usize,
    pub a: usize,
    pub next: usize,
    pub log_pi: f64,
}

/// Discriminator whose reward `r[s][a]` and potential `φ[s]` are plain tables.
///
/// Parameters are laid out as `r` (row-major, `|S|·|A|`) followed by `φ` (`|S|`).
#[derive(Debug, Clone)]
pub struct TabularDiscriminator {
    n_states: usize,
    n_actions: usize,
    discount: f64,
    mode: FMode,
    r: Vec<f64>,
    phi: Vec<f64>,
    adam: AdamState,
}

impl TabularDiscriminator {
    pub fn new(n_states: usize, n_actions: usize, discount: f64, mode: FMode, lr: f64) -> Self {
        Self {
            n_states,
            n_actions,
            discount,
            mode,
            r: vec![0.0; n_states * n_actions],
            phi: vec![0.0; n_states],
            adam: AdamState::new(n_states * n_actions + n_states, lr),
        }
    }

    pub fn with_tables(mut self, r: Vec<f64>, phi: Vec<f64>) -> Self {
        assert_eq!(r.len(), self.r.len());
        assert_eq!(phi.len(), self.phi.len());
        self.r = r;
        self.phi = phi;
        self
    }

    pub fn mode(&self) -> FMode {
        self.mode
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.r.clone();
        p.extend_from_slice(&self.phi);
        p
    }

    pub fn set_params(&mut self, params: &[f64]) {
        let k = self.r.len();
        self.r.copy_from_slice(&params[..k]);
        self.phi.copy_from_slice(&params[k..]);
    }

    /// `f(s,a)` using the model row in [`FMode::Model`] and `next` in [`FMode::Sample`].
    pub fn f_value(&self, s: usize, a: usize, next: usize, model: &Kernel) -> f64 {
        let succ = match self.mode {
            FMode::Model => model.expect(s, a, &self.phi),
            FMode::Sample => self.phi[next],
        };
        self.r[s * self.n_actions + a] + self.discount * succ - self.phi[s]
    }

    /// Model-expectation `f` for every pair, in row-major order.
    pub fn f_table(&self, model: &Kernel) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.r.len());
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                out.push(
                    self.r[s * self.n_actions + a] + self.discount * model.expect(s, a, &self.phi)
                        - self.phi[s],
                );
            }
        }
        out
    }

    fn accumulate(&self, x: &TabularDiscSample, g: f64, model: &Kernel, grad: &mut [f64]) {
        let k = self.r.len();
        grad[x.s * self.n_actions + x.a] += g;
        grad[k + x.s] -= g;
        match self.mode {
            FMode::Model => {
                for (sp, p) in model.row(x.s, x.a).iter().enumerate() {
                    grad[k + sp] += g * self.discount * p;
                }
            }
            FMode::Sample => grad[k + x.next] += g * self.discount,
        }
    }

    /// `−mean_exp log D − mean_pol log(1−D)` and its gradient; policy log-probabilities are constants.
    pub fn loss_and_grads(
        &self,
        expert: &[TabularDiscSample],
        policy: &[TabularDiscSample],
        model: &Kernel,
    ) -> Result<DiscLoss, AdversarialError> {
        if expert.is_empty() || policy.is_empty() {
            return Err(AdversarialError::EmptyBatch);
        }
        let mut grad = vec![0.0; self.r.len() + self.phi.len()];
        let (mut loss, mut de, mut dp) = (0.0, 0.0, 0.0);
        let ne = expert.len() as f64;
        for x in expert {
            let z = self.f_value(x.s, x.a, x.next, model) - x.log_pi;
            let (l, g) = expert_term(z);
            loss += l / ne;
            de += clamped_prob(z, 0.0) / ne;
            self.accumulate(x, g / ne, model, &mut grad);
        }
        let np = policy.len() as f64;
        for x in policy {
            let z = self.f_value(x.s, x.a, x.next, model) - x.log_pi;
            let (l, g) = policy_term(z);
            loss += l / np;
            dp += clamped_prob(z, 0.0) / np;
            self.accumulate(x, g / np, model, &mut grad);
        }
        Ok(DiscLoss {
            loss,
            grad,
            mean_d_expert: de,
            mean_d_policy: dp,
        })
    }

    /// One Adam step on the discriminator loss; returns the pre-step evaluation.
    pub fn train_step(
        &mut self,
        expert: &[TabularDiscSample],
        policy: &[TabularDiscSample],
        model: &Kernel,
    ) -> Result<DiscLoss, AdversarialError> {
        let out = self.loss_and_grads(expert, policy, model)?;
        let mut params = self.params();
        self.adam.step(&mut params, &out.grad, None);
        self.set_params(&params);
        Ok(out)
    }
}

/// Neural discriminator input. `successors` holds the model draws used for the
/// potential expectation ([`FMode::Model`]) or the single observed successor.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralDiscSample {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub successors: Vec<Vec<f64>>,
    pub log_pi: f64,
}

/// Discriminator with network reward `R_θ(s,a)` and potential `φ_θ(s)`.
///
/// Parameters are the reward network's followed by the potential network's.
#[derive(Debug, Clone)]
pub struct NeuralDiscriminator {
    discount: f64,
    mode: FMode,
    n_model_samples: usize,
    r_net: Mlp,
    phi_net: Mlp,
    adam: AdamState,
    clip_norm: Option<f64>,
}

impl NeuralDiscriminator {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        discount: f64,
        mode: FMode,
        n_model_samples: usize,
        lr: f64,
        rng: &mut R,
    ) -> Self {
        let mut r_sizes = vec![state_dim + action_dim];
        r_sizes.extend_from_slice(hidden);
        r_sizes.push(1);
        let mut phi_sizes = vec![state_dim];
        phi_sizes.extend_from_slice(hidden);
        phi_sizes.push(1);
        let r_net = Mlp::new(&r_sizes, Activation::Identity, rng);
        let phi_net = Mlp::new(&phi_sizes, Activation::Identity, rng);
        let n = r_net.n_params() + phi_net.n_params();
        Self {
            discount,
            mode,
            n_model_samples: n_model_samples.max(1),
            r_net,
            phi_net,
            adam: AdamState::new(n, lr),
            clip_norm: Some(10.0),
        }
    }

    pub fn from_nets(
        r_net: Mlp,
        phi_net: Mlp,
        discount: f64,
        mode: FMode,
        n_model_samples: usize,
    ) -> Self {
        let n = r_net.n_params() + phi_net.n_params();
        Self {
            discount,
            mode,
            n_model_samples: n_model_samples.max(1),
            r_net,
            phi_net,
            adam: AdamState::new(n, DEFAULT_LR),
            clip_norm: Some(10.0),
        }
    }

    pub fn mode(&self) -> FMode {
        self.mode
    }

    pub fn r_net(&self) -> &Mlp {
        &self.r_net
    }

    pub fn phi_net(&self) -> &Mlp {
        &self.phi_net
    }

    pub fn n_params(&self) -> usize {
        self.r_net.n_params() + self.phi_net.n_params()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.r_net.params().to_vec();
        p.extend_from_slice(self.phi_net.params());
        p
    }

    pub fn set_params(&mut self, params: &[f64]) {
        let k = self.r_net.n_params();
        self.r_net.set_params(&params[..k]);
        self.phi_net.set_params(&params[k..]);
    }

    /// Successor set for one transition: model draws (clipped to the model's state
    /// bound) in [`FMode::Model`], the observed `next` otherwise.
    pub fn successors<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        action: &[f64],
        next: &[f64],
        model: Option<&GaussianDynamicsModel>,
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>, AdversarialError> {
        match (self.mode, model) {
            (FMode::Model, Some(m)) => (0..self.n_model_samples)
                .map(|_| m.sample_next(state, action, rng).map_err(Into::into))
                .collect(),
            _ => Ok(vec![next.to_vec()]),
        }
    }

    pub fn reward_term(&self, state: &[f64], action: &[f64]) -> Result<f64, AdversarialError> {
        let mut x = state.to_vec();
        x.extend_from_slice(action);
        Ok(self.r_net.forward(&x)?[0])
    }

    pub fn potential(&self, state: &[f64]) -> Result<f64, AdversarialError> {
        Ok(self.phi_net.forward(state)?[0])
    }

    pub fn f_value(
        &self,
        state: &[f64],
        action: &[f64],
        successors: &[Vec<f64>],
    ) -> Result<f64, AdversarialError> {
        let mut succ = 0.0;
        for s in successors {
            succ += self.potential(s)?;
        }
        succ /= successors.len() as f64;
        Ok(self.reward_term(state, action)? + self.discount * succ - self.potential(state)?)
    }

    /// Monte Carlo `f` from fresh model draws.
    pub fn f_value_sampled(
        &self,
        state: &[f64],
        action: &[f64],
        model: &GaussianDynamicsModel,
        n_samples: usize,
        rng: &mut SeededRng,
    ) -> Result<f64, AdversarialError> {
        let succ: Result<Vec<_>, _> = (0..n_samples.max(1))
            .map(|_| model.sample_next(state, action, rng))
            .collect();
        self.f_value(state, action, &succ?)
    }

    fn accumulate(
        &self,
        x: &NeuralDiscSample,
        g: f64,
        grad: &mut [f64],
    ) -> Result<(), AdversarialError> {
        let k = self.r_net.n_params();
        let (gr, gphi) = grad.split_at_mut(k);
        let mut input = x.state.clone();
        input.extend_from_slice(&x.action);
        let tape = self.r_net.forward_tape(&input)?;
        self.r_net.backward(&tape, &[g], gr);
        let tape = self.phi_net.forward_tape(&x.state)?;
        self.phi_net.backward(&tape, &[-g], gphi);
        let w = g * self.discount / x.successors.len() as f64;
        for s in &x.successors {
            let tape = self.phi_net.forward_tape(s)?;
            self.phi_net.backward(&tape, &[w], gphi);
        }
        Ok(())
    }

    pub fn loss_and_grads(
        &self,
        expert: &[NeuralDiscSample],
        policy: &[NeuralDiscSample],
    ) -> Result<DiscLoss, AdversarialError> {
        if expert.is_empty() || policy.is_empty() {
            return Err(AdversarialError::EmptyBatch);
        }
        let mut grad = vec![0.0; self.n_params()];
        let (mut loss, mut de, mut dp) = (0.0, 0.0, 0.0);
        let ne = expert.len() as f64;
        for x in expert {
            let z = self.f_value(&x.state, &x.action, &x.successors)? - x.log_pi;
            let (l, g) = expert_term(z);
            loss += l / ne;
            de += clamped_prob(z, 0.0) / ne;
            self.accumulate(x, g / ne, &mut grad)?;
        }
        let np = policy.len() as f64;
        for x in policy {
            let z = self.f_value(&x.state, &x.action, &x.successors)? - x.log_pi;
            let (l, g) = policy_term(z);
            loss += l / np;
            dp += clamped_prob(z, 0.0) / np;
            self.accumulate(x, g / np, &mut grad)?;
        }
        Ok(DiscLoss {
            loss,
            grad,
            mean_d_expert: de,
            mean_d_policy: dp,
        })
    }

    pub fn train_step(
        &mut self,
        expert: &[NeuralDiscSample],
        policy: &[NeuralDiscSample],
    ) -> Result<DiscLoss, AdversarialError> {
        let out = self.loss_and_grads(expert, policy)?;
        let mut params = self.params();
        self.adam.step(&mut params, &out.grad, self.clip_norm);
        self.set_params(&params);
        Ok(out)
    }
}

fn check_occupancy(mdp: &TabularMdp, occ: &[f64]) -> Result<(), AdversarialError> {
    let expected = mdp.n_states() * mdp.n_actions();
    if occ.len() != expected {
        return Err(AdversarialError::OccupancyShape {
            expected,
            got: occ.len(),
        });
    }
    Ok(())
}

/// Exact MCE-IRL gradient `d_exp − d_π` for a tabular reward `θ[s][a]`, where `π` is
/// soft-optimal for `θ` and both occupancies are discounted and normalised.
pub fn mce_irl_gradient(
    mdp: &TabularMdp,
    theta: &[f64],
    expert_occupancy: &[f64],
    tol: f64,
) -> Result<Vec<f64>, AdversarialError> {
    check_occupancy(mdp, expert_occupancy)?;
    let m = mdp.with_reward(theta.to_vec())?;
    let values = soft_value_iteration(&m, tol, ORACLE_MAX_ITERS)?;
    let pi = soft_optimal_policy(&values);
    let d_pi = discounted_occupancy(&m, &pi, tol)?;
    Ok(expert_occupancy
        .iter()
        .zip(&d_pi)
        .map(|(e, p)| e - p)
        .collect())
}

/// Vector-Jacobian product `Σ_{s,a} w(s,a)·∂A(s,a)/∂θ` for the soft advantage of a
/// tabular reward, given the soft-optimal policy of that reward.
///
/// With `M[(s,a),(s',a')] = T(s'|s,a)π(a'|s')` the Q-Jacobian is `(I − γM)^{-1}`
/// and `∂V/∂Q = π`, so the product solves `x = u + γMᵀx` with
/// `u(s,a) = w(s,a) − π(a|s)·Σ_b w(s,b)`.
pub fn advantage_vjp(mdp: &TabularMdp, policy: &crate::mdp::TabularPolicy, w: &[f64]) -> Vec<f64> {
    let (ns, na, g) = (mdp.n_states(), mdp.n_actions(), mdp.discount());
    let mut u = w.to_vec();
    for s in 0..ns {
        let total: f64 = w[s * na..(s + 1) * na].iter().sum();
        for a in 0..na {
            u[s * na + a] -= policy.prob(s, a) * total;
        }
    }
    let mut x = u.clone();
    let mut mass = vec![0.0; ns];
    for _ in 0..ORACLE_MAX_ITERS {
        mass.iter_mut().for_each(|m| *m = 0.0);
        for s in 0..ns {
            for a in 0..na {
                let xi = x[s * na + a];
                if xi != 0.0 {
                    for (m, p) in mass.iter_mut().zip(mdp.kernel().row(s, a)) {
                        *m += xi * p;
                    }
                }
            }
        }
        let mut delta = 0.0f64;
        for s in 0..ns {
            for a in 0..na {
                let new = u[s * na + a] + g * policy.prob(s, a) * mass[s];
                delta = delta.max((new - x[s * na + a]).abs());
                x[s * na + a] = new;
            }
        }
        if delta * g / (1.0 - g) <= 1e-15 || delta == 0.0 {
            break;
        }
    }
    x
}

/// Exact-expectation discriminator gradient `−2·∇_θ L_disc` when `f = A^soft_θ + δ`.
///
/// Expectations are occupancy-weighted: `d_exp` for expert terms, the discounted
/// occupancy of `π = exp(A^soft_θ)` for policy terms. `perturbation = Some((i, δ))`
/// adds `δ` to `f` at flat index `i`.
pub fn discriminator_gradient_exact(
    mdp: &TabularMdp,
    theta: &[f64],
    expert_occupancy: &[f64],
    perturbation: Option<(usize, f64)>,
    tol: f64,
) -> Result<Vec<f64>, AdversarialError> {
    check_occupancy(mdp, expert_occupancy)?;
    let m = mdp.with_reward(theta.to_vec())?;
    let values = soft_value_iteration(&m, tol, ORACLE_MAX_ITERS)?;
    let pi = soft_optimal_policy(&values);
    let d_pi = discounted_occupancy(&m, &pi, tol)?;
    let mut f = values.adv.clone();
    if let Some((i, delta)) = perturbation {
        f[i] += delta;
    }
    let w: Vec<f64> = (0..f.len())
        .map(|i| {
            let d = discriminator_prob(f[i], pi.as_slice()[i].ln());
            2.0 * expert_occupancy[i] * (1.0 - d) - 2.0 * d_pi[i] * d
        })
        .collect();
    Ok(advantage_vjp(&m, &pi, &w))
}

/// Sup-norm gap between the exact discriminator gradient (`−2·∇L_disc`) and the
/// MCE-IRL gradient for the same `θ`.
pub fn proposition1_alignment_gap(
    mdp: &TabularMdp,
    theta: &[f64],
    expert_occupancy: &[f64],
    perturbation: Option<(usize, f64)>,
    tol: f64,
) -> Result<f64, AdversarialError> {
    let disc = discriminator_gradient_exact(mdp, theta, expert_occupancy, perturbation, tol)?;
    let mce = mce_irl_gradient(mdp, theta, expert_occupancy, tol)?;
    Ok(disc
        .iter()
        .zip(&mce)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}
