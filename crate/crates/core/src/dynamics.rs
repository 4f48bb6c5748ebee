//! Learned transition models and the error measures used to compare them with the truth.
//!
//! Tabular models are smoothed transition counts; continuous models are a pair of
//! networks predicting a diagonal Gaussian over the state change.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::mdp::{sample_index, Kernel, MdpError, TabularPolicy};
use crate::neural::{Activation, AdamState, Mlp, NeuralError};
use crate::rng::{rng_from_seed, SeededRng};

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
pub const DEFAULT_HIDDEN: [usize; 2] = [128, 128];
pub const DEFAULT_LR: f64 = 3e-4;
pub const DEFAULT_CLIP: f64 = 10.0;

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("smoothing must be finite and nonnegative, got {0}")]
    Alpha(f64),
    #[error("transition ({s}, {a}, {next}) is out of range")]
    Index { s: usize, a: usize, next: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("sample has wrong dimensions")]
    SampleShape,
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// One observed tabular transition `(s, a, s')`.
pub type TabularSample = (usize, usize, usize);

/// One observed continuous transition.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSample {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next: Vec<f64>,
}

/// Transition counts with symmetric Dirichlet smoothing.
///
/// `T̂(s'|s,a) = (N + α) / Σ(N + α)`. A row with no counts and `α = 0` is undefined
/// and falls back to uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDynamicsEstimate {
    n_states: usize,
    n_actions: usize,
    alpha: f64,
    counts: Vec<u64>,
    row_totals: Vec<u64>,
}

impl TabularDynamicsEstimate {
    pub fn new(n_states: usize, n_actions: usize, alpha: f64) -> Result<Self, DynamicsError> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(DynamicsError::Alpha(alpha));
        }
        Ok(Self {
            n_states,
            n_actions,
            alpha,
            counts: vec![0; n_states * n_actions * n_states],
            row_totals: vec![0; n_states * n_actions],
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn count(&self, s: usize, a: usize, next: usize) -> u64 {
        self.counts[(s * self.n_actions + a) * self.n_states + next]
    }

    pub fn total(&self) -> u64 {
        self.row_totals.iter().sum()
    }

    pub fn observe(&mut self, s: usize, a: usize, next: usize) -> Result<(), DynamicsError> {
        if s >= self.n_states || a >= self.n_actions || next >= self.n_states {
            return Err(DynamicsError::Index { s, a, next });
        }
        let row = s * self.n_actions + a;
        self.counts[row * self.n_states + next] += 1;
        self.row_totals[row] += 1;
        Ok(())
    }

    pub fn row(&self, s: usize, a: usize) -> Vec<f64> {
        let ns = self.n_states;
        let row = s * self.n_actions + a;
        let denom = self.row_totals[row] as f64 + self.alpha * ns as f64;
        if denom <= 0.0 {
            return vec![1.0 / ns as f64; ns];
        }
        self.counts[row * ns..(row + 1) * ns]
            .iter()
            .map(|&c| (c as f64 + self.alpha) / denom)
            .collect()
    }

    pub fn kernel(&self) -> Kernel {
        let mut probs = Vec::with_capacity(self.counts.len());
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                probs.extend(self.row(s, a));
            }
        }
        Kernel::new(self.n_states, self.n_actions, probs).expect("smoothed counts are stochastic")
    }
}

pub fn fit_tabular(
    n_states: usize,
    n_actions: usize,
    transitions: &[TabularSample],
    alpha: f64,
) -> Result<TabularDynamicsEstimate, DynamicsError> {
    let mut est = TabularDynamicsEstimate::new(n_states, n_actions, alpha)?;
    for &(s, a, next) in transitions {
        est.observe(s, a, next)?;
    }
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvDistance {
    /// `max_{s,a} TV(T(·|s,a), T̂(·|s,a))`; this is the reported `ε_T`.
    pub max: f64,
    /// Row distances averaged under the supplied state-action weights (uniform if absent).
    pub weighted: f64,
}

pub fn row_tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Total-variation distance between two kernels on the same spaces.
///
/// `weights` is a distribution over flat `(s, a)` indices `s·|A| + a`.
pub fn tv_distance(truth: &Kernel, est: &Kernel, weights: Option<&[f64]>) -> TvDistance {
    assert_eq!(truth.n_states(), est.n_states());
    assert_eq!(truth.n_actions(), est.n_actions());
    let (ns, na) = (truth.n_states(), truth.n_actions());
    let mut max = 0.0f64;
    let mut weighted = 0.0;
    for s in 0..ns {
        for a in 0..na {
            let d = row_tv(truth.row(s, a), est.row(s, a));
            max = max.max(d);
            weighted += match weights {
                Some(w) => w[s * na + a] * d,
                None => d / (ns * na) as f64,
            };
        }
    }
    TvDistance { max, weighted }
}

/// Total variation between two univariate Gaussians by numerical quadrature.
pub fn gaussian_tv_1d(m1: f64, s1: f64, m2: f64, s2: f64) -> f64 {
    let lo = (m1 - 12.0 * s1).min(m2 - 12.0 * s2);
    let hi = (m1 + 12.0 * s1).max(m2 + 12.0 * s2);
    let pdf = |x: f64, m: f64, s: f64| {
        (-0.5 * ((x - m) / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    };
    // Composite Simpson with a grid fine relative to the narrower density.
    let n = (((hi - lo) / s1.min(s2)) * 50.0)
        .ceil()
        .clamp(2000.0, 2_000_000.0) as usize;
    let n = n + n % 2;
    let h = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let x = lo + i as f64 * h;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * (pdf(x, m1, s1) - pdf(x, m2, s2)).abs();
    }
    (0.5 * acc * h / 3.0).min(1.0)
}

/// Diagonal Gaussian over `s' = s + Δ`, with `Δ ~ N(μ(s,a), diag σ(s,a)²)`.
///
/// The log-std output is hard-clamped to `[LOG_STD_MIN, LOG_STD_MAX]`; clamped
/// coordinates carry no gradient.
#[derive(Debug, Clone)]
pub struct GaussianDynamicsModel {
    state_dim: usize,
    action_dim: usize,
    mean_net: Mlp,
    log_std_net: Mlp,
    state_bound: f64,
    adam: AdamState,
    clip_norm: f64,
}

/// Predictive distribution of the successor state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrediction {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl GaussianPrediction {
    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }
}

impl GaussianDynamicsModel {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        state_bound: f64,
        rng: &mut R,
    ) -> Self {
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(state_dim);
        let mean_net = Mlp::new(&sizes, Activation::Identity, rng);
        let log_std_net = Mlp::new(&sizes, Activation::Identity, rng);
        let n = mean_net.n_params() + log_std_net.n_params();
        Self {
            state_dim,
            action_dim,
            mean_net,
            log_std_net,
            state_bound,
            adam: AdamState::new(n, DEFAULT_LR),
            clip_norm: DEFAULT_CLIP,
        }
    }

    pub fn with_optimizer(mut self, lr: f64, clip_norm: f64) -> Self {
        self.adam = AdamState::new(self.n_params(), lr);
        self.clip_norm = clip_norm;
        self
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn state_bound(&self) -> f64 {
        self.state_bound
    }

    pub fn mean_net(&self) -> &Mlp {
        &self.mean_net
    }

    pub fn log_std_net(&self) -> &Mlp {
        &self.log_std_net
    }

    pub fn n_params(&self) -> usize {
        self.mean_net.n_params() + self.log_std_net.n_params()
    }

    /// Mean-network parameters followed by log-std-network parameters.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.mean_net.params().to_vec();
        p.extend_from_slice(self.log_std_net.params());
        p
    }

    pub fn set_params(&mut self, params: &[f64]) {
        let k = self.mean_net.n_params();
        self.mean_net.set_params(&params[..k]);
        self.log_std_net.set_params(&params[k..]);
    }

    fn input(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        if state.len() != self.state_dim || action.len() != self.action_dim {
            return Err(DynamicsError::SampleShape);
        }
        let mut x = state.to_vec();
        x.extend_from_slice(action);
        Ok(x)
    }

    pub fn predict(
        &self,
        state: &[f64],
        action: &[f64],
    ) -> Result<GaussianPrediction, DynamicsError> {
        let x = self.input(state, action)?;
        let delta = self.mean_net.forward(&x)?;
        let raw = self.log_std_net.forward(&x)?;
        Ok(GaussianPrediction {
            mean: state.iter().zip(&delta).map(|(s, d)| s + d).collect(),
            log_std: raw
                .iter()
                .map(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX))
                .collect(),
        })
    }

    /// Draw a successor and clip it to the state bound.
    pub fn sample_next<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        action: &[f64],
        rng: &mut R,
    ) -> Result<Vec<f64>, DynamicsError> {
        let p = self.predict(state, action)?;
        Ok(p.mean
            .iter()
            .zip(&p.log_std)
            .map(|(m, l)| {
                let eps: f64 = StandardNormal.sample(rng);
                (m + l.exp() * eps).clamp(-self.state_bound, self.state_bound)
            })
            .collect())
    }

    /// One clipped Adam step on the negative log-likelihood; returns the pre-step loss.
    pub fn train_step(&mut self, batch: &[ContinuousSample]) -> Result<f64, DynamicsError> {
        let (loss, grad) = gaussian_nll_loss(self, batch)?;
        let mut params = self.params();
        self.adam.step(&mut params, &grad, Some(self.clip_norm));
        self.set_params(&params);
        Ok(loss)
    }
}

/// Mean negative log-likelihood of `batch` and its gradient in the layout of
/// [`GaussianDynamicsModel::params`].
pub fn gaussian_nll_loss(
    model: &GaussianDynamicsModel,
    batch: &[ContinuousSample],
) -> Result<(f64, Vec<f64>), DynamicsError> {
    if batch.is_empty() {
        return Err(DynamicsError::EmptyBatch);
    }
    let k = model.mean_net.n_params();
    let mut grad = vec![0.0; model.n_params()];
    let (g_mean, g_std) = grad.split_at_mut(k);
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for sample in batch {
        if sample.next.len() != model.state_dim {
            return Err(DynamicsError::SampleShape);
        }
        let x = model.input(&sample.state, &sample.action)?;
        let mt = model.mean_net.forward_tape(&x)?;
        let lt = model.log_std_net.forward_tape(&x)?;
        let mut up_mean = vec![0.0; model.state_dim];
        let mut up_std = vec![0.0; model.state_dim];
        for d in 0..model.state_dim {
            let mu = sample.state[d] + mt.output()[d];
            let raw = lt.output()[d];
            let l = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
            let inv_var = (-2.0 * l).exp();
            let r = sample.next[d] - mu;
            loss += 0.5 * r * r * inv_var + l + HALF_LOG_2PI;
            up_mean[d] = -r * inv_var / n;
            if raw > LOG_STD_MIN && raw < LOG_STD_MAX {
                up_std[d] = (1.0 - r * r * inv_var) / n;
            }
        }
        model.mean_net.backward(&mt, &up_mean, g_mean);
        model.log_std_net.backward(&lt, &up_std, g_std);
    }
    Ok((loss / n, grad))
}

/// `H`-step rollouts through a tabular model from each start state.
pub fn rollout_synthetic_tabular(
    model: &Kernel,
    policy: &TabularPolicy,
    start_states: &[usize],
    horizon: usize,
    seed: u64,
) -> Vec<TabularSample> {
    let mut rng = rng_from_seed(seed);
    rollout_synthetic_tabular_with(model, policy, start_states, horizon, &mut rng)
}

pub fn rollout_synthetic_tabular_with(
    model: &Kernel,
    policy: &TabularPolicy,
    start_states: &[usize],
    horizon: usize,
    rng: &mut SeededRng,
) -> Vec<TabularSample> {
    let mut out = Vec::with_capacity(start_states.len() * horizon);
    for &start in start_states {
        let mut s = start;
        for _ in 0..horizon {
            let a = policy.sample(s, rng);
            let next = sample_index(model.row(s, a), rng);
            out.push((s, a, next));
            s = next;
        }
    }
    out
}

/// `H`-step rollouts through a Gaussian model; `policy` maps a state to an action.
pub fn rollout_synthetic_continuous<P>(
    model: &GaussianDynamicsModel,
    policy: P,
    start_states: &[Vec<f64>],
    horizon: usize,
    seed: u64,
) -> Result<Vec<ContinuousSample>, DynamicsError>
where
    P: FnMut(&[f64], &mut SeededRng) -> Vec<f64>,
{
    let mut rng = rng_from_seed(seed);
    rollout_synthetic_continuous_with(model, policy, start_states, horizon, &mut rng)
}

pub fn rollout_synthetic_continuous_with<P>(
    model: &GaussianDynamicsModel,
    mut policy: P,
    start_states: &[Vec<f64>],
    horizon: usize,
    rng: &mut SeededRng,
) -> Result<Vec<ContinuousSample>, DynamicsError>
where
    P: FnMut(&[f64], &mut SeededRng) -> Vec<f64>,
{
    let mut out = Vec::with_capacity(start_states.len() * horizon);
    for start in start_states {
        let mut s = start.clone();
        for _ in 0..horizon {
            let a = policy(&s, rng);
            let next = model.sample_next(&s, &a, rng)?;
            out.push(ContinuousSample {
                state: s,
                action: a,
                next: next.clone(),
            });
            s = next;
        }
    }
    Ok(out)
}
