//! Finite stochastic MDPs, tabular policies and trajectories.
//!
//! Tables are stored flat and row-major: a kernel entry `T(s'|s,a)` lives at
//! `(s * n_actions + a) * n_states + s'`, a reward or policy entry at
//! `s * n_actions + a`.

mod continuous;
mod demo;
mod gridworld;

pub use continuous::{make_noisy_pointmass, ContinuousEnv};
pub use demo::{ContinuousTransition, DemoError, DemoHeader, Demonstrations, TabularTransition};
pub use gridworld::{make_gridworld, GridAction};

use rand::Rng;
use thiserror::Error;

use crate::rng::{rng_from_seed, SeededRng};

/// Row-sum tolerance for every probability table in the crate.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("dimension must be positive: {0}")]
    EmptyDimension(&'static str),
    #[error("{what} has length {got}, expected {expected}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{what} row {row} sums to {sum} (or has a negative/non-finite entry)")]
    NotStochastic {
        what: &'static str,
        row: usize,
        sum: f64,
    },
    #[error("reward {value} at pair {pair} exceeds r_max {r_max}")]
    RewardBound { pair: usize, value: f64, r_max: f64 },
    #[error("discount {0} outside (0, 1)")]
    Discount(f64),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("occupancy did not converge after {iterations} sweeps (delta {delta:e})")]
    IterationLimit { iterations: usize, delta: f64 },
}

fn check_distribution(what: &'static str, row: usize, p: &[f64]) -> Result<(), MdpError> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) || (sum - 1.0).abs() > PROB_TOL {
        return Err(MdpError::NotStochastic { what, row, sum });
    }
    Ok(())
}

/// Normalise a nonnegative vector in place; all-zero input becomes uniform.
pub fn normalize(p: &mut [f64]) {
    let sum: f64 = p.iter().sum();
    if sum > 0.0 {
        p.iter_mut().for_each(|x| *x /= sum);
    } else {
        let u = 1.0 / p.len() as f64;
        p.iter_mut().for_each(|x| *x = u);
    }
}

/// Transition kernel `T(s'|s,a)`; every row is a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Kernel {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self, MdpError> {
        if n_states == 0 {
            return Err(MdpError::EmptyDimension("n_states"));
        }
        if n_actions == 0 {
            return Err(MdpError::EmptyDimension("n_actions"));
        }
        let expected = n_states * n_actions * n_states;
        if probs.len() != expected {
            return Err(MdpError::Shape {
                what: "kernel",
                expected,
                got: probs.len(),
            });
        }
        for (row, chunk) in probs.chunks(n_states).enumerate() {
            check_distribution("kernel", row, chunk)?;
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    /// Kernel whose rows are i.i.d. flat-Dirichlet draws.
    pub fn random<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> Self {
        let mut probs = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            probs.extend(random_simplex(n_states, rng));
        }
        Self::new(n_states, n_actions, probs).expect("normalised rows")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.probs[start..start + self.n_states]
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.row(s, a)[next]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// `Σ_{s'} T(s'|s,a) f(s')`.
    pub fn expect(&self, s: usize, a: usize, f: &[f64]) -> f64 {
        self.row(s, a).iter().zip(f).map(|(p, v)| p * v).sum()
    }
}

/// A flat-Dirichlet sample: normalised i.i.d. exponentials.
pub fn random_simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    normalize(&mut p);
    p
}

/// Finite MDP `⟨S, A, T, γ, R, ρ0⟩` with a reward bound `r_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    kernel: Kernel,
    reward: Vec<f64>,
    discount: f64,
    init_dist: Vec<f64>,
    r_max: f64,
}

impl TabularMdp {
    pub fn new(
        kernel: Kernel,
        reward: Vec<f64>,
        discount: f64,
        init_dist: Vec<f64>,
        r_max: f64,
    ) -> Result<Self, MdpError> {
        let (ns, na) = (kernel.n_states, kernel.n_actions);
        if reward.len() != ns * na {
            return Err(MdpError::Shape {
                what: "reward",
                expected: ns * na,
                got: reward.len(),
            });
        }
        if init_dist.len() != ns {
            return Err(MdpError::Shape {
                what: "init_dist",
                expected: ns,
                got: init_dist.len(),
            });
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(MdpError::Discount(discount));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(MdpError::Parameter(format!(
                "r_max must be positive, got {r_max}"
            )));
        }
        for (pair, &value) in reward.iter().enumerate() {
            if !value.is_finite() || value.abs() > r_max {
                return Err(MdpError::RewardBound { pair, value, r_max });
            }
        }
        check_distribution("init_dist", 0, &init_dist)?;
        Ok(Self {
            kernel,
            reward,
            discount,
            init_dist,
            r_max,
        })
    }

    /// Random MDP: Dirichlet kernel rows, rewards `U[-1, 1]`, Dirichlet `ρ0`, `r_max = 1`.
    pub fn random<R: Rng + ?Sized>(
        n_states: usize,
        n_actions: usize,
        discount: f64,
        rng: &mut R,
    ) -> Self {
        let kernel = Kernel::random(n_states, n_actions, rng);
        let reward = (0..n_states * n_actions)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        let init = random_simplex(n_states, rng);
        Self::new(kernel, reward, discount, init, 1.0).expect("valid random MDP")
    }

    pub fn n_states(&self) -> usize {
        self.kernel.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.kernel.n_actions
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    pub fn reward_at(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions() + a]
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn init_dist(&self) -> &[f64] {
        &self.init_dist
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Same dynamics with a different reward table; `r_max` grows to cover it.
    pub fn with_reward(&self, reward: Vec<f64>) -> Result<Self, MdpError> {
        let bound = reward.iter().fold(self.r_max, |m, r| m.max(r.abs()));
        Self::new(
            self.kernel.clone(),
            reward,
            self.discount,
            self.init_dist.clone(),
            bound,
        )
    }

    /// Same reward and discount under another kernel (e.g. a learned estimate).
    pub fn with_kernel(&self, kernel: Kernel) -> Result<Self, MdpError> {
        if kernel.n_states != self.n_states() || kernel.n_actions != self.n_actions() {
            return Err(MdpError::Shape {
                what: "kernel",
                expected: self.kernel.probs.len(),
                got: kernel.probs.len(),
            });
        }
        Self::new(
            kernel,
            self.reward.clone(),
            self.discount,
            self.init_dist.clone(),
            self.r_max,
        )
    }

    pub fn with_discount(&self, discount: f64) -> Result<Self, MdpError> {
        Self::new(
            self.kernel.clone(),
            self.reward.clone(),
            discount,
            self.init_dist.clone(),
            self.r_max,
        )
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.init_dist, rng)
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        sample_index(self.kernel.row(s, a), rng)
    }
}

/// Draw an index from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    // Inverse-CDF on one uniform draw keeps the RNG consumption fixed per call.
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &pi) in p.iter().enumerate() {
        if pi > 0.0 {
            acc += pi;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Stochastic policy table `π(a|s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self, MdpError> {
        if n_states == 0 || n_actions == 0 {
            return Err(MdpError::EmptyDimension("policy"));
        }
        if probs.len() != n_states * n_actions {
            return Err(MdpError::Shape {
                what: "policy",
                expected: n_states * n_actions,
                got: probs.len(),
            });
        }
        for (row, chunk) in probs.chunks(n_actions).enumerate() {
            check_distribution("policy", row, chunk)?;
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    /// Normalises each row before validation.
    pub fn from_unnormalized(
        n_states: usize,
        n_actions: usize,
        mut weights: Vec<f64>,
    ) -> Result<Self, MdpError> {
        if weights.len() == n_states * n_actions && n_actions > 0 {
            weights.chunks_mut(n_actions).for_each(normalize);
        }
        Self::new(n_states, n_actions, weights)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_actions as f64;
        Self::new(n_states, n_actions, vec![p; n_states * n_actions]).expect("uniform policy")
    }

    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self, MdpError> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(MdpError::Parameter(format!("action {a} out of range")));
            }
            probs[s * n_actions + a] = 1.0;
        }
        Self::new(actions.len(), n_actions, probs)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        sample_index(self.row(s), rng)
    }

    /// Most probable action; ties go to the lowest index.
    pub fn greedy(&self, s: usize) -> usize {
        argmax(self.row(s))
    }
}

/// Index of the maximum; ties broken by the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// A finite trajectory `(s_0,a_0), …, (s_{T-1},a_{T-1})` ending in `terminal_state = s_T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub steps: Vec<(usize, usize)>,
    pub terminal_state: usize,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// Consecutive `(s, a, s')` triples.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.steps.iter().enumerate().map(move |(t, &(s, a))| {
            let next = self
                .steps
                .get(t + 1)
                .map(|&(s1, _)| s1)
                .unwrap_or(self.terminal_state);
            (s, a, next)
        })
    }

    pub fn discounted_return(&self, mdp: &TabularMdp) -> f64 {
        let g = mdp.discount();
        self.steps
            .iter()
            .rev()
            .fold(0.0, |acc, &(s, a)| mdp.reward_at(s, a) + g * acc)
    }
}

pub fn sample_trajectory(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    horizon: usize,
    seed: u64,
) -> Trajectory {
    let mut rng = rng_from_seed(seed);
    sample_trajectory_with(mdp, policy, horizon, &mut rng)
}

pub fn sample_trajectory_with(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    horizon: usize,
    rng: &mut SeededRng,
) -> Trajectory {
    assert!(horizon >= 1, "horizon must be at least 1");
    let mut s = mdp.sample_initial(rng);
    let mut steps = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let a = policy.sample(s, rng);
        steps.push((s, a));
        s = mdp.sample_next(s, a, rng);
    }
    Trajectory {
        steps,
        terminal_state: s,
    }
}

/// Undiscounted path log-likelihood `log ρ0(s0) + Σ_t [log π(a_t|s_t) + log T(s_{t+1}|s_t,a_t)]`.
///
/// Impossible trajectories give `-inf`.
pub fn trajectory_log_prob(mdp: &TabularMdp, policy: &TabularPolicy, traj: &Trajectory) -> f64 {
    let Some(&(s0, _)) = traj.steps.first() else {
        return f64::NEG_INFINITY;
    };
    let mut lp = mdp.init_dist()[s0].ln();
    for (s, a, next) in traj.transitions() {
        lp += policy.prob(s, a).ln() + mdp.kernel().prob(s, a, next).ln();
    }
    if lp.is_nan() {
        f64::NEG_INFINITY
    } else {
        lp
    }
}

pub const OCCUPANCY_MAX_ITERS: usize = 1_000_000;

/// `(1-γ)`-normalised discounted state-action occupancy by power iteration on
/// `d(s,a) = π(a|s)[(1-γ)ρ0(s) + γ Σ d(s̄,ā) T(s|s̄,ā)]`.
pub fn discounted_occupancy(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    tol: f64,
) -> Result<Vec<f64>, MdpError> {
    if !(tol > 0.0) {
        return Err(MdpError::Parameter(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let (ns, na, g) = (mdp.n_states(), mdp.n_actions(), mdp.discount());
    let kernel = mdp.kernel();
    let mut d: Vec<f64> = (0..ns * na)
        .map(|i| mdp.init_dist()[i / na] * policy.as_slice()[i])
        .collect();
    let mut state_mass = vec![0.0; ns];
    let mut delta = f64::INFINITY;
    for _ in 0..OCCUPANCY_MAX_ITERS {
        for (s, m) in state_mass.iter_mut().enumerate() {
            *m = (1.0 - g) * mdp.init_dist()[s];
        }
        for s in 0..ns {
            for a in 0..na {
                let w = g * d[s * na + a];
                if w != 0.0 {
                    for (m, p) in state_mass.iter_mut().zip(kernel.row(s, a)) {
                        *m += w * p;
                    }
                }
            }
        }
        delta = 0.0;
        for s in 0..ns {
            for a in 0..na {
                let new = policy.prob(s, a) * state_mass[s];
                delta = f64::max(delta, (new - d[s * na + a]).abs());
                d[s * na + a] = new;
            }
        }
        // The map is a γ-contraction in l1, so γ/(1-γ)·delta bounds the distance to the fixed point.
        if delta * g / (1.0 - g) <= tol || delta == 0.0 {
            return Ok(d);
        }
    }
    Err(MdpError::IterationLimit {
        iterations: OCCUPANCY_MAX_ITERS,
        delta,
    })
}

/// State marginal `d(s) = Σ_a d(s,a)`.
pub fn state_marginal(occupancy: &[f64], n_actions: usize) -> Vec<f64> {
    occupancy
        .chunks(n_actions)
        .map(|c| c.iter().sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    fn single_state(reward: f64, discount: f64) -> TabularMdp {
        let k = Kernel::new(1, 1, vec![1.0]).unwrap();
        TabularMdp::new(k, vec![reward], discount, vec![1.0], reward.abs().max(1.0)).unwrap()
    }

    fn two_state_chain() -> TabularMdp {
        // s' = s + 1 mod 2 under the single action.
        let k = Kernel::new(2, 1, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        TabularMdp::new(k, vec![0.0, 0.0], 0.9, vec![1.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(matches!(
            Kernel::new(2, 1, vec![0.5, 0.4, 1.0, 0.0]),
            Err(MdpError::NotStochastic { row: 0, .. })
        ));
        let k = Kernel::new(1, 1, vec![1.0]).unwrap();
        assert!(matches!(
            TabularMdp::new(k.clone(), vec![2.0], 0.9, vec![1.0], 1.0),
            Err(MdpError::RewardBound { .. })
        ));
        assert!(matches!(
            TabularMdp::new(k.clone(), vec![0.0], 1.0, vec![1.0], 1.0),
            Err(MdpError::Discount(_))
        ));
        assert!(TabularMdp::new(k, vec![0.0], 0.5, vec![0.9], 1.0).is_err());
        assert!(TabularPolicy::new(1, 2, vec![0.7, 0.7]).is_err());
    }

    #[test]
    fn single_outcome_trajectory() {
        let mdp = single_state(0.0, 0.9);
        let pi = TabularPolicy::uniform(1, 1);
        let t = sample_trajectory(&mdp, &pi, 3, 11);
        assert_eq!(t.steps, vec![(0, 0), (0, 0), (0, 0)]);
        assert_eq!(t.terminal_state, 0);
        assert_eq!(t.horizon(), 3);
    }

    #[test]
    fn deterministic_chain_trajectory() {
        let mdp = two_state_chain();
        let pi = TabularPolicy::deterministic(1, &[0, 0]).unwrap();
        let t = sample_trajectory(&mdp, &pi, 2, 5);
        assert_eq!(t.steps, vec![(0, 0), (1, 0)]);
        assert_eq!(t.terminal_state, 0);
    }

    #[test]
    fn sampled_successors_match_kernel() {
        let row = [0.5, 0.3, 0.2];
        let mut probs = Vec::new();
        for _ in 0..3 {
            probs.extend_from_slice(&row);
        }
        let k = Kernel::new(3, 1, probs).unwrap();
        let mdp = TabularMdp::new(k, vec![0.0; 3], 0.9, vec![1.0, 0.0, 0.0], 1.0).unwrap();
        let pi = TabularPolicy::uniform(3, 1);
        let t = sample_trajectory(&mdp, &pi, 100_000, 3);
        let mut counts = [0usize; 3];
        for (_, _, next) in t.transitions() {
            counts[next] += 1;
        }
        for (c, p) in counts.iter().zip(row) {
            assert!((*c as f64 / 1e5 - p).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn log_prob_examples() {
        let mdp = two_state_chain();
        let pi = TabularPolicy::deterministic(1, &[0, 0]).unwrap();
        let t = sample_trajectory(&mdp, &pi, 4, 0);
        assert_eq!(trajectory_log_prob(&mdp, &pi, &t), 0.0);

        let impossible = Trajectory {
            steps: vec![(0, 0), (0, 0)],
            terminal_state: 1,
        };
        assert_eq!(
            trajectory_log_prob(&mdp, &pi, &impossible),
            f64::NEG_INFINITY
        );

        let k = Kernel::new(2, 2, vec![0.5; 8]).unwrap();
        let mdp = TabularMdp::new(k, vec![0.0; 4], 0.9, vec![0.5, 0.5], 1.0).unwrap();
        let pi = TabularPolicy::uniform(2, 2);
        let t = Trajectory {
            steps: vec![(0, 1), (1, 0)],
            terminal_state: 1,
        };
        let expected = 5.0 * 0.5f64.ln();
        assert!((trajectory_log_prob(&mdp, &pi, &t) - expected).abs() < 1e-12);
        assert!((expected + 3.4657).abs() < 1e-4);
    }

    #[test]
    fn occupancy_trivial_cases() {
        let mdp = single_state(1.0, 0.9);
        let pi = TabularPolicy::uniform(1, 1);
        let d = discounted_occupancy(&mdp, &pi, 1e-12).unwrap();
        assert!((d[0] - 1.0).abs() < 1e-12);

        let mut rng = rng_from_seed(4);
        let mdp = TabularMdp::random(4, 3, 1e-9, &mut rng);
        let pi = TabularPolicy::from_unnormalized(4, 3, (0..12).map(|i| 1.0 + i as f64).collect())
            .unwrap();
        let d = discounted_occupancy(&mdp, &pi, 1e-12).unwrap();
        for s in 0..4 {
            for a in 0..3 {
                let expected = mdp.init_dist()[s] * pi.prob(s, a);
                assert!((d[s * 3 + a] - expected).abs() < 1e-8);
            }
        }
        assert!(discounted_occupancy(&mdp, &pi, 0.0).is_err());
    }

    #[test]
    fn occupancy_matches_linear_solve() {
        use nalgebra::{DMatrix, DVector};
        let mut rng = rng_from_seed(21);
        let mdp = TabularMdp::random(4, 2, 0.9, &mut rng);
        let pi = TabularPolicy::from_unnormalized(
            4,
            2,
            (0..8).map(|_| rand::Rng::random::<f64>(&mut rng)).collect(),
        )
        .unwrap();
        let d = discounted_occupancy(&mdp, &pi, 1e-13).unwrap();
        // State marginal solves (I - γ P_π^T) μ = (1-γ) ρ0.
        let n = 4;
        let mut m = DMatrix::<f64>::identity(n, n);
        for s in 0..n {
            for a in 0..2 {
                for s1 in 0..n {
                    m[(s1, s)] -= 0.9 * pi.prob(s, a) * mdp.kernel().prob(s, a, s1);
                }
            }
        }
        let rhs = DVector::from_iterator(n, mdp.init_dist().iter().map(|p| 0.1 * p));
        let mu = m.lu().solve(&rhs).unwrap();
        for s in 0..n {
            for a in 0..2 {
                assert!((d[s * 2 + a] - mu[s] * pi.prob(s, a)).abs() < 1e-8);
            }
        }
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn random_constructors_are_stochastic(seed in any::<u64>(), ns in 1usize..8, na in 1usize..5) {
            let mut rng = rng_from_seed(seed);
            let mdp = TabularMdp::random(ns, na, 0.9, &mut rng);
            for s in 0..ns {
                for a in 0..na {
                    let sum: f64 = mdp.kernel().row(s, a).iter().sum();
                    prop_assert!((sum - 1.0).abs() <= PROB_TOL);
                }
            }
            prop_assert!((mdp.init_dist().iter().sum::<f64>() - 1.0).abs() <= PROB_TOL);
            let w: Vec<f64> = (0..ns * na).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
            let pi = TabularPolicy::from_unnormalized(ns, na, w).unwrap();
            for s in 0..ns {
                prop_assert!((pi.row(s).iter().sum::<f64>() - 1.0).abs() <= PROB_TOL);
            }
        }

        #[test]
        fn sampling_is_pure_and_log_prob_finite(seed in any::<u64>(), horizon in 1usize..30) {
            let mut rng = rng_from_seed(seed ^ 0x5eed);
            let mdp = TabularMdp::random(5, 3, 0.9, &mut rng);
            let pi = TabularPolicy::uniform(5, 3);
            let a = sample_trajectory(&mdp, &pi, horizon, seed);
            let b = sample_trajectory(&mdp, &pi, horizon, seed);
            prop_assert_eq!(&a, &b);
            prop_assert!(trajectory_log_prob(&mdp, &pi, &a) > f64::NEG_INFINITY);
        }

        #[test]
        fn occupancy_is_a_distribution(seed in any::<u64>()) {
            let mut rng = rng_from_seed(seed);
            let mdp = TabularMdp::random(4, 2, 0.95, &mut rng);
            let pi = TabularPolicy::uniform(4, 2);
            let d = discounted_occupancy(&mdp, &pi, 1e-10).unwrap();
            prop_assert!(d.iter().all(|x| *x >= 0.0));
            prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }
}
