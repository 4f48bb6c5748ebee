//! Model-error bounds for learned rewards and the empirical checks behind them:
//! bound calculators, the explicit feasible-reward construction, and Monte Carlo
//! soundness sweeps against exact dynamic-programming oracles.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use thiserror::Error;

use crate::dynamics::tv_distance;
use crate::mdp::{Kernel, MdpError, TabularMdp, TabularPolicy};
use crate::rng::{rng_from_seed, SeededRng};
use crate::soft_dp::{hard_value_iteration, policy_value, DpError, ORACLE_MAX_ITERS, ORACLE_TOL};

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("problems differ in {0}")]
    Mismatch(&'static str),
}

/// Reward-error bound `γ/(1−γ) · |S| · ε_T · R_max`.
pub fn reward_error_bound(gamma: f64, n_states: usize, eps_t: f64, r_max: f64) -> f64 {
    gamma / (1.0 - gamma) * n_states as f64 * eps_t * r_max
}

/// Optimal-value bound `ε_T · [γ/(1−γ)² + (1+γ)/(1−γ)² · |S|] · R_max`.
pub fn performance_difference_bound(gamma: f64, n_states: usize, eps_t: f64, r_max: f64) -> f64 {
    let d = (1.0 - gamma).powi(2);
    eps_t * (gamma / d + (1.0 + gamma) / d * n_states as f64) * r_max
}

/// Dynamics (the MDP's own reward is ignored) together with an expert policy.
#[derive(Debug, Clone, PartialEq)]
pub struct IrlProblem {
    pub mdp: TabularMdp,
    pub expert: TabularPolicy,
}

impl IrlProblem {
    pub fn new(mdp: TabularMdp, expert: TabularPolicy) -> Result<Self, TheoryError> {
        if expert.n_states() != mdp.n_states() || expert.n_actions() != mdp.n_actions() {
            return Err(TheoryError::Mismatch("policy shape"));
        }
        Ok(Self { mdp, expert })
    }

    /// The same expert on different dynamics.
    pub fn with_kernel(&self, kernel: Kernel) -> Result<Self, TheoryError> {
        Ok(Self {
            mdp: self.mdp.with_kernel(kernel)?,
            expert: self.expert.clone(),
        })
    }
}

/// Value vector and non-negative slack defining one feasible reward.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleRewardWitness {
    pub v: Vec<f64>,
    pub xi: Vec<f64>,
}

impl FeasibleRewardWitness {
    /// `V ~ U[−R_max/(1−γ), R_max/(1−γ)]`, `ξ ~ U[0, 1]`.
    pub fn random<R: Rng + ?Sized>(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        r_max: f64,
        rng: &mut R,
    ) -> Self {
        let c = r_max / (1.0 - gamma);
        Self {
            v: (0..n_states).map(|_| rng.random_range(-c..=c)).collect(),
            xi: (0..n_states * n_actions)
                .map(|_| rng.random::<f64>())
                .collect(),
        }
    }

    /// Scales `V` down so that `‖V‖_∞ ≤ R_max/(1−γ)`; returns whether it changed.
    pub fn enforce_value_norm(&mut self, gamma: f64, r_max: f64) -> bool {
        let limit = r_max / (1.0 - gamma);
        let norm = self.v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if norm > limit {
            let k = limit / norm;
            self.v.iter_mut().for_each(|x| *x *= k);
            true
        } else {
            false
        }
    }
}

/// `R(s,a) = V(s) − γ Σ_s' T(s'|s,a) V(s') − ξ(s,a)·[π(a|s) = 0]`.
pub fn feasible_reward(problem: &IrlProblem, witness: &FeasibleRewardWitness) -> Vec<f64> {
    let mdp = &problem.mdp;
    let (ns, na, g) = (mdp.n_states(), mdp.n_actions(), mdp.discount());
    assert_eq!(witness.v.len(), ns, "witness value length");
    assert_eq!(witness.xi.len(), ns * na, "witness slack length");
    let mut r = Vec::with_capacity(ns * na);
    for s in 0..ns {
        for a in 0..na {
            let slack = if problem.expert.prob(s, a) == 0.0 {
                witness.xi[s * na + a]
            } else {
                0.0
            };
            r.push(witness.v[s] - g * mdp.kernel().expect(s, a, &witness.v) - slack);
        }
    }
    r
}

fn check_compatible(a: &IrlProblem, b: &IrlProblem) -> Result<(), TheoryError> {
    if a.mdp.n_states() != b.mdp.n_states() || a.mdp.n_actions() != b.mdp.n_actions() {
        return Err(TheoryError::Mismatch("state or action count"));
    }
    if a.mdp.discount() != b.mdp.discount() {
        return Err(TheoryError::Mismatch("discount"));
    }
    if a.expert != b.expert {
        return Err(TheoryError::Mismatch("expert policy"));
    }
    Ok(())
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// One reward-error comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem2Check {
    pub gap: f64,
    pub eps_t: f64,
    pub bound: f64,
    /// The witness needed rescaling to satisfy the value-norm premise.
    pub rescaled: bool,
}

impl Theorem2Check {
    pub fn holds(&self) -> bool {
        self.gap <= self.bound + 1e-12
    }
}

/// `‖R^E − R̂^E‖_∞` for rewards built from the same witness on the true and the
/// estimated kernel, against the bound at the measured max-row TV.
pub fn theorem2_gap(
    truth: &IrlProblem,
    est: &IrlProblem,
    witness: &FeasibleRewardWitness,
    r_max: f64,
) -> Result<Theorem2Check, TheoryError> {
    check_compatible(truth, est)?;
    let g = truth.mdp.discount();
    let mut w = witness.clone();
    let rescaled = w.enforce_value_norm(g, r_max);
    let r = feasible_reward(truth, &w);
    let r_hat = feasible_reward(est, &w);
    let eps_t = tv_distance(truth.mdp.kernel(), est.mdp.kernel(), None).max;
    Ok(Theorem2Check {
        gap: sup_diff(&r, &r_hat),
        eps_t,
        bound: reward_error_bound(g, truth.mdp.n_states(), eps_t, r_max),
        rescaled,
    })
}

/// Summary of [`verify_theorem2`] over many witnesses.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem2Report {
    pub samples: usize,
    pub eps_t: f64,
    pub bound: f64,
    pub max_gap: f64,
    /// Largest `gap / bound`; `0` when every gap and the bound vanish.
    pub max_ratio: f64,
    pub violations: usize,
    pub rescaled: usize,
}

impl Theorem2Report {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

fn ratio(gap: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        gap / bound
    } else if gap <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Checks the reward-error bound for `samples` random witnesses.
pub fn verify_theorem2(
    truth: &IrlProblem,
    est: &IrlProblem,
    samples: usize,
    r_max: f64,
    rng: &mut SeededRng,
) -> Result<Theorem2Report, TheoryError> {
    let (ns, na, g) = (
        truth.mdp.n_states(),
        truth.mdp.n_actions(),
        truth.mdp.discount(),
    );
    let mut report = Theorem2Report {
        samples,
        eps_t: tv_distance(truth.mdp.kernel(), est.mdp.kernel(), None).max,
        bound: 0.0,
        max_gap: 0.0,
        max_ratio: 0.0,
        violations: 0,
        rescaled: 0,
    };
    for _ in 0..samples {
        let w = FeasibleRewardWitness::random(ns, na, g, r_max, rng);
        let c = theorem2_gap(truth, est, &w, r_max)?;
        report.bound = c.bound;
        report.max_gap = report.max_gap.max(c.gap);
        report.max_ratio = report.max_ratio.max(ratio(c.gap, c.bound));
        report.violations += (!c.holds()) as usize;
        report.rescaled += c.rescaled as usize;
    }
    Ok(report)
}

/// Optimal-value comparison between a true and an estimated problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem3Report {
    /// `‖V^{π*}_{M∪R} − V^{π̂*}_{M̂∪R̂}‖_∞`.
    pub observed_gap: f64,
    pub eps_t: f64,
    pub r_max: f64,
    pub bound: f64,
    /// `‖V^{π*}_{M̂∪R̂} − V^{π̂*}_{M̂∪R̂}‖_∞`: the two optimal policies compared inside
    /// the estimated problem. Logged, not checked.
    pub policy_gap_in_estimate: f64,
    /// `‖V^{π*}_{M∪R} − V^{π̂*}_{M∪R}‖_∞`: the estimated optimum deployed in the
    /// true problem. Logged, not checked.
    pub transfer_gap: f64,
}

impl Theorem3Report {
    pub fn holds(&self) -> bool {
        self.observed_gap <= self.bound + 1e-8
    }
}

/// Solves both problems with hard value iteration and compares their optimal values.
/// `r_max` enters the bound; rewards are taken as given.
pub fn verify_theorem3(
    truth: &IrlProblem,
    reward: &[f64],
    est: &IrlProblem,
    reward_est: &[f64],
    r_max: f64,
) -> Result<Theorem3Report, TheoryError> {
    check_compatible(truth, est)?;
    let m = truth.mdp.with_reward(reward.to_vec())?;
    let m_hat = est.mdp.with_reward(reward_est.to_vec())?;
    let pi = hard_value_iteration(&m, ORACLE_TOL, ORACLE_MAX_ITERS)?.greedy_policy();
    let pi_hat = hard_value_iteration(&m_hat, ORACLE_TOL, ORACLE_MAX_ITERS)?.greedy_policy();
    let v = policy_value(&m, &pi, ORACLE_TOL)?;
    let v_hat = policy_value(&m_hat, &pi_hat, ORACLE_TOL)?;
    let v_pi_in_hat = policy_value(&m_hat, &pi, ORACLE_TOL)?;
    let v_hat_in_true = policy_value(&m, &pi_hat, ORACLE_TOL)?;
    let eps_t = tv_distance(truth.mdp.kernel(), est.mdp.kernel(), None).max;
    Ok(Theorem3Report {
        observed_gap: sup_diff(&v, &v_hat),
        eps_t,
        r_max,
        bound: performance_difference_bound(
            truth.mdp.discount(),
            truth.mdp.n_states(),
            eps_t,
            r_max,
        ),
        policy_gap_in_estimate: sup_diff(&v_pi_in_hat, &v_hat),
        transfer_gap: sup_diff(&v, &v_hat_in_true),
    })
}

/// Mixes every row with a Dirichlet(1) draw: `(1−λ)·T(·|s,a) + λ·q`.
pub fn perturb_kernel<R: Rng + ?Sized>(kernel: &Kernel, lambda: f64, rng: &mut R) -> Kernel {
    let (ns, na) = (kernel.n_states(), kernel.n_actions());
    let gamma = Gamma::new(1.0, 1.0).expect("valid shape");
    let mut probs = Vec::with_capacity(ns * na * ns);
    for s in 0..ns {
        for a in 0..na {
            let q: Vec<f64> = (0..ns).map(|_| gamma.sample(rng) + 1e-300).collect();
            let z: f64 = q.iter().sum();
            for (p, x) in kernel.row(s, a).iter().zip(&q) {
                probs.push((1.0 - lambda) * p + lambda * x / z);
            }
        }
    }
    Kernel::new(ns, na, probs).expect("convex combination of distributions")
}

/// Random expert: each state supports a random non-empty subset of actions, uniformly.
pub fn random_expert<R: Rng + ?Sized>(
    n_states: usize,
    n_actions: usize,
    rng: &mut R,
) -> TabularPolicy {
    let mut probs = vec![0.0; n_states * n_actions];
    for s in 0..n_states {
        let row = &mut probs[s * n_actions..(s + 1) * n_actions];
        row[rng.random_range(0..n_actions)] = 1.0;
        for p in row.iter_mut() {
            if rng.random::<f64>() < 0.3 {
                *p = 1.0;
            }
        }
    }
    TabularPolicy::from_unnormalized(n_states, n_actions, probs).expect("non-empty support")
}

/// One row of a sweep report.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub instance_id: usize,
    pub gamma: f64,
    pub n_states: usize,
    pub eps_t: f64,
    pub observed_gap: f64,
    pub bound: f64,
    pub ratio: f64,
}

pub const SWEEP_HEADER: &str = "instance_id,gamma,n_states,eps_T,observed_gap,bound,ratio";

/// Rows of a soundness sweep plus the logged side quantities.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub violations: usize,
    pub max_ratio: f64,
    /// Largest logged auxiliary gap (optimal-value sweeps only).
    pub max_policy_gap_in_estimate: f64,
    pub max_transfer_gap: f64,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.instance_id, r.gamma, r.n_states, r.eps_t, r.observed_gap, r.bound, r.ratio
            );
        }
        out
    }

    pub fn holds(&self) -> bool {
        self.violations == 0
    }

    fn push(&mut self, row: SweepRow, ok: bool) {
        self.violations += (!ok) as usize;
        self.max_ratio = self.max_ratio.max(row.ratio);
        self.rows.push(row);
    }
}

/// Shape of the random instances in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub instances: usize,
    pub gammas: Vec<f64>,
    pub min_states: usize,
    pub max_states: usize,
    pub max_actions: usize,
    /// Upper end of the uniform perturbation rate `λ`.
    pub max_lambda: f64,
    pub r_max: f64,
    pub seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            instances: 1000,
            gammas: vec![0.5, 0.9],
            min_states: 2,
            max_states: 8,
            max_actions: 4,
            max_lambda: 0.5,
            r_max: 1.0,
            seed: 0,
        }
    }
}

struct Instance {
    truth: IrlProblem,
    est: IrlProblem,
    witness: FeasibleRewardWitness,
}

fn random_instance(
    spec: &SweepSpec,
    id: usize,
    rng: &mut SeededRng,
) -> Result<Instance, TheoryError> {
    let gamma = spec.gammas[id % spec.gammas.len()];
    let ns = rng.random_range(spec.min_states..=spec.max_states);
    let na = rng.random_range(2..=spec.max_actions.max(2));
    let mdp = TabularMdp::random(ns, na, gamma, rng);
    let expert = random_expert(ns, na, rng);
    let truth = IrlProblem::new(mdp, expert)?;
    let lambda = rng.random_range(0.0..=spec.max_lambda);
    let est = truth.with_kernel(perturb_kernel(truth.mdp.kernel(), lambda, rng))?;
    let witness = FeasibleRewardWitness::random(ns, na, gamma, spec.r_max, rng);
    Ok(Instance {
        truth,
        est,
        witness,
    })
}

/// Reward-error soundness sweep; one random (MDP, perturbation, witness) per row.
pub fn sweep_theorem2(spec: &SweepSpec) -> Result<SweepReport, TheoryError> {
    let mut rng = rng_from_seed(spec.seed);
    let mut report = SweepReport::default();
    for id in 0..spec.instances {
        let inst = random_instance(spec, id, &mut rng)?;
        let c = theorem2_gap(&inst.truth, &inst.est, &inst.witness, spec.r_max)?;
        report.push(
            SweepRow {
                instance_id: id,
                gamma: inst.truth.mdp.discount(),
                n_states: inst.truth.mdp.n_states(),
                eps_t: c.eps_t,
                observed_gap: c.gap,
                bound: c.bound,
                ratio: ratio(c.gap, c.bound),
            },
            c.holds(),
        );
    }
    Ok(report)
}

/// Optimal-value soundness sweep; rewards come from a shared witness on each kernel,
/// and `R_max` in the bound is the largest reward magnitude of the pair.
pub fn sweep_theorem3(spec: &SweepSpec) -> Result<SweepReport, TheoryError> {
    let mut rng = rng_from_seed(spec.seed);
    let mut report = SweepReport::default();
    for id in 0..spec.instances {
        let mut inst = random_instance(spec, id, &mut rng)?;
        inst.witness
            .enforce_value_norm(inst.truth.mdp.discount(), spec.r_max);
        let r = feasible_reward(&inst.truth, &inst.witness);
        let r_hat = feasible_reward(&inst.est, &inst.witness);
        let r_max = r.iter().chain(&r_hat).fold(0.0f64, |m, x| m.max(x.abs()));
        let c = verify_theorem3(&inst.truth, &r, &inst.est, &r_hat, r_max)?;
        report.max_policy_gap_in_estimate = report
            .max_policy_gap_in_estimate
            .max(c.policy_gap_in_estimate);
        report.max_transfer_gap = report.max_transfer_gap.max(c.transfer_gap);
        let ok = c.holds();
        report.push(
            SweepRow {
                instance_id: id,
                gamma: inst.truth.mdp.discount(),
                n_states: inst.truth.mdp.n_states(),
                eps_t: c.eps_t,
                observed_gap: c.observed_gap,
                bound: c.bound,
                ratio: ratio(c.observed_gap, c.bound),
            },
            ok,
        );
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(ns: usize, na: usize, gamma: f64, seed: u64) -> IrlProblem {
        let mut rng = rng_from_seed(seed);
        let mdp = TabularMdp::random(ns, na, gamma, &mut rng);
        let expert = random_expert(ns, na, &mut rng);
        IrlProblem::new(mdp, expert).unwrap()
    }

    #[test]
    fn bound_arithmetic() {
        assert_eq!(reward_error_bound(0.9, 5, 0.0, 1.0), 0.0);
        assert!((reward_error_bound(0.9, 5, 0.1, 1.0) - 4.5).abs() < 1e-12);
        assert!(
            (reward_error_bound(0.9, 10, 0.1, 1.0) - 2.0 * reward_error_bound(0.9, 5, 0.1, 1.0))
                .abs()
                < 1e-12
        );
        assert_eq!(performance_difference_bound(0.9, 5, 0.0, 1.0), 0.0);
        assert!((performance_difference_bound(0.9, 5, 0.1, 1.0) - 104.0).abs() < 1e-9);
        let mut last = 0.0;
        for k in 1..1000 {
            let b = performance_difference_bound(k as f64 / 1000.0, 5, 0.1, 1.0);
            assert!(b > last);
            last = b;
        }
        for eps in [1e-1, 1e-3, 1e-6, 1e-9] {
            assert!(reward_error_bound(0.9, 5, eps, 1.0) <= 45.0 * eps + 1e-15);
            assert!(performance_difference_bound(0.9, 5, eps, 1.0) <= 1040.0 * eps + 1e-12);
        }
    }

    #[test]
    fn feasible_reward_examples() {
        let p = problem(4, 3, 0.9, 1);
        let zero = FeasibleRewardWitness {
            v: vec![0.0; 4],
            xi: vec![0.0; 12],
        };
        assert!(feasible_reward(&p, &zero).iter().all(|r| *r == 0.0));
        let c = FeasibleRewardWitness {
            v: vec![2.5; 4],
            xi: vec![0.0; 12],
        };
        assert!(feasible_reward(&p, &c)
            .iter()
            .all(|r| (r - 0.25).abs() < 1e-12));
    }

    #[test]
    fn expert_actions_are_optimal_for_feasible_rewards() {
        let mut rng = rng_from_seed(5);
        for seed in 0..20 {
            let p = problem(4, 3, 0.9, seed);
            let w = FeasibleRewardWitness::random(4, 3, 0.9, 1.0, &mut rng);
            let m = p.mdp.with_reward(feasible_reward(&p, &w)).unwrap();
            let hard = hard_value_iteration(&m, 1e-12, ORACLE_MAX_ITERS).unwrap();
            for s in 0..4 {
                assert!((hard.v[s] - w.v[s]).abs() < 1e-8);
                for a in 0..3 {
                    let q = hard.q[s * 3 + a];
                    if p.expert.prob(s, a) > 0.0 {
                        assert!((q - hard.v[s]).abs() < 1e-8);
                    } else {
                        assert!(q <= hard.v[s] + 1e-8);
                    }
                }
            }
            // Zero slack makes every action optimal.
            let flat = FeasibleRewardWitness {
                xi: vec![0.0; 12],
                ..w
            };
            let m = p.mdp.with_reward(feasible_reward(&p, &flat)).unwrap();
            let hard = hard_value_iteration(&m, 1e-12, ORACLE_MAX_ITERS).unwrap();
            for i in 0..12 {
                assert!(hard.q[i] - hard.v[i / 3] <= 1e-8 && hard.v[i / 3] - hard.q[i] <= 1e-8);
            }
        }
    }

    #[test]
    fn identical_kernels_have_zero_gap() {
        let p = problem(5, 2, 0.9, 2);
        let mut rng = rng_from_seed(0);
        let rep = verify_theorem2(&p, &p.clone(), 50, 1.0, &mut rng).unwrap();
        assert_eq!(rep.max_gap, 0.0);
        assert!(rep.holds());
        let w = FeasibleRewardWitness::random(5, 2, 0.9, 1.0, &mut rng);
        let r = feasible_reward(&p, &w);
        let t3 = verify_theorem3(&p, &r, &p, &r, 1.0).unwrap();
        assert!(t3.observed_gap <= 1e-8 && t3.holds());
    }

    #[test]
    fn single_row_perturbation_within_bound() {
        let p = problem(5, 2, 0.9, 3);
        let k = p.mdp.kernel();
        let mut probs = k.as_slice().to_vec();
        // Move 0.1 of mass inside the (0, 0) row: TV exactly 0.1.
        let row = &mut probs[..5];
        let (hi, _) = row
            .iter()
            .enumerate()
            .fold((0, 0.0), |b, (i, &x)| if x > b.1 { (i, x) } else { b });
        let take = 0.1f64.min(row[hi]);
        row[hi] -= take;
        row[(hi + 1) % 5] += take;
        let est = p.with_kernel(Kernel::new(5, 2, probs).unwrap()).unwrap();
        let mut rng = rng_from_seed(1);
        let rep = verify_theorem2(&p, &est, 100, 1.0, &mut rng).unwrap();
        assert!((rep.eps_t - take).abs() < 1e-12);
        assert!(rep.holds() && rep.max_gap <= 4.5 * take / 0.1);
    }

    #[test]
    fn witness_rescaling() {
        let mut w = FeasibleRewardWitness {
            v: vec![30.0, -5.0],
            xi: vec![0.0; 2],
        };
        assert!(w.enforce_value_norm(0.9, 1.0));
        assert!((w.v[0] - 10.0).abs() < 1e-12);
        assert!(!w.enforce_value_norm(0.9, 1.0));
    }

    #[test]
    fn zero_model_error_gives_zero_value_gap() {
        for seed in 0..10 {
            let p = problem(6, 3, 0.9, seed);
            let mut rng = rng_from_seed(100 + seed);
            let w = FeasibleRewardWitness::random(6, 3, 0.9, 1.0, &mut rng);
            let r = feasible_reward(&p, &w);
            let rep = verify_theorem3(&p, &r, &p.clone(), &r, 1.0).unwrap();
            assert_eq!(rep.bound, 0.0);
            assert!(rep.observed_gap <= 1e-8);
        }
    }

    #[test]
    fn small_sweeps_are_sound() {
        let spec = SweepSpec {
            instances: 150,
            ..SweepSpec::default()
        };
        let t2 = sweep_theorem2(&spec).unwrap();
        assert!(t2.holds(), "max ratio {}", t2.max_ratio);
        assert!(t2.rows.iter().any(|r| r.observed_gap > 0.0));
        let t3 = sweep_theorem3(&spec).unwrap();
        assert!(t3.holds());
        let csv = t2.to_csv();
        assert!(csv.starts_with(SWEEP_HEADER));
        assert_eq!(csv.lines().count(), 151);
    }

    #[test]
    fn perturbation_controls_tv() {
        let p = problem(5, 2, 0.9, 4);
        let mut rng = rng_from_seed(2);
        assert_eq!(
            tv_distance(
                p.mdp.kernel(),
                &perturb_kernel(p.mdp.kernel(), 0.0, &mut rng),
                None
            )
            .max,
            0.0
        );
        let small = tv_distance(
            p.mdp.kernel(),
            &perturb_kernel(p.mdp.kernel(), 0.05, &mut rng),
            None,
        )
        .max;
        let large = tv_distance(
            p.mdp.kernel(),
            &perturb_kernel(p.mdp.kernel(), 0.5, &mut rng),
            None,
        )
        .max;
        assert!(small <= 0.05 + 1e-12 && small < large && large <= 0.5 + 1e-12);
    }
}
