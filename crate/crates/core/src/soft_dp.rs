//! Exact soft (entropy-regularised) and hard dynamic programming on tabular MDPs.
//!
//! Soft Bellman backup:
//!
//! ```text
//! V(s)   = log Σ_a exp Q(s,a)
//! Q(s,a) = R(s,a) + γ Σ_{s'} T(s'|s,a) V(s')
//! π(a|s) = exp(Q(s,a) - V(s))
//! ```

use thiserror::Error;

use crate::mdp::{argmax, TabularMdp, TabularPolicy};

/// Oracle tolerance used by the verification suites.
pub const ORACLE_TOL: f64 = 1e-10;
pub const ORACLE_MAX_ITERS: usize = 1_000_000;
/// Loose tolerance for inner loops.
pub const INNER_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpError {
    #[error("no convergence after {iterations} sweeps (residual {residual:e})")]
    IterationLimit { iterations: usize, residual: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Numerically stable `log Σ exp xs`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftValues {
    pub n_states: usize,
    pub n_actions: usize,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub adv: Vec<f64>,
    /// Sup-norm soft Bellman residual of `q`.
    pub residual: f64,
    pub iterations: usize,
}

impl SoftValues {
    fn from_q(mdp: &TabularMdp, q: Vec<f64>, residual: f64, iterations: usize) -> Self {
        let na = mdp.n_actions();
        let v: Vec<f64> = q.chunks(na).map(logsumexp).collect();
        let adv = q.iter().enumerate().map(|(i, qi)| qi - v[i / na]).collect();
        Self {
            n_states: mdp.n_states(),
            n_actions: na,
            q,
            v,
            adv,
            residual,
            iterations,
        }
    }

    pub fn q_at(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.n_actions + a]
    }

    pub fn adv_at(&self, s: usize, a: usize) -> f64 {
        self.adv[s * self.n_actions + a]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardValues {
    pub n_states: usize,
    pub n_actions: usize,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl HardValues {
    /// Deterministic greedy policy, lowest action index on ties.
    pub fn greedy_policy(&self) -> TabularPolicy {
        let actions: Vec<usize> = self.q.chunks(self.n_actions).map(argmax).collect();
        TabularPolicy::deterministic(self.n_actions, &actions).expect("greedy policy")
    }
}

/// One soft Bellman backup of `q` under `mdp`'s reward and kernel.
pub fn soft_bellman_backup(mdp: &TabularMdp, q: &[f64]) -> Vec<f64> {
    let na = mdp.n_actions();
    let v: Vec<f64> = q.chunks(na).map(logsumexp).collect();
    backup_with(mdp, &v)
}

/// One max-Bellman backup.
pub fn hard_bellman_backup(mdp: &TabularMdp, q: &[f64]) -> Vec<f64> {
    let na = mdp.n_actions();
    let v: Vec<f64> = q
        .chunks(na)
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    backup_with(mdp, &v)
}

fn backup_with(mdp: &TabularMdp, v: &[f64]) -> Vec<f64> {
    let (ns, na, g) = (mdp.n_states(), mdp.n_actions(), mdp.discount());
    let mut out = Vec::with_capacity(ns * na);
    for s in 0..ns {
        for a in 0..na {
            out.push(mdp.reward_at(s, a) + g * mdp.kernel().expect(s, a, v));
        }
    }
    out
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn iterate(
    mdp: &TabularMdp,
    tol: f64,
    max_iters: usize,
    backup: fn(&TabularMdp, &[f64]) -> Vec<f64>,
) -> Result<(Vec<f64>, f64, usize), DpError> {
    if !(tol > 0.0) || max_iters == 0 {
        return Err(DpError::Argument(format!(
            "tol must be positive and max_iters >= 1 (tol={tol}, max_iters={max_iters})"
        )));
    }
    let mut q = vec![0.0; mdp.n_states() * mdp.n_actions()];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iters {
        let next = backup(mdp, &q);
        let delta = sup_diff(&next, &q);
        q = next;
        // ‖B q_k - q_k‖ ≤ γ·delta, so this certifies the returned table.
        residual = mdp.discount() * delta;
        if residual <= tol {
            let exact = sup_diff(&backup(mdp, &q), &q);
            return Ok((q, exact, it));
        }
    }
    Err(DpError::IterationLimit {
        iterations: max_iters,
        residual,
    })
}

pub fn soft_value_iteration(
    mdp: &TabularMdp,
    tol: f64,
    max_iters: usize,
) -> Result<SoftValues, DpError> {
    let (q, residual, iterations) = iterate(mdp, tol, max_iters, soft_bellman_backup)?;
    Ok(SoftValues::from_q(mdp, q, residual, iterations))
}

/// Soft value iteration at oracle tolerance.
pub fn soft_value_iteration_oracle(mdp: &TabularMdp) -> Result<SoftValues, DpError> {
    soft_value_iteration(mdp, ORACLE_TOL, ORACLE_MAX_ITERS)
}

/// `π(a|s) = exp(A(s,a))`, renormalised against rounding.
pub fn soft_optimal_policy(values: &SoftValues) -> TabularPolicy {
    let w = values.adv.iter().map(|a| a.exp()).collect();
    TabularPolicy::from_unnormalized(values.n_states, values.n_actions, w)
        .expect("softmax rows are distributions")
}

pub fn hard_value_iteration(
    mdp: &TabularMdp,
    tol: f64,
    max_iters: usize,
) -> Result<HardValues, DpError> {
    let (q, residual, iterations) = iterate(mdp, tol, max_iters, hard_bellman_backup)?;
    let v = q
        .chunks(mdp.n_actions())
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    Ok(HardValues {
        n_states: mdp.n_states(),
        n_actions: mdp.n_actions(),
        q,
        v,
        residual,
        iterations,
    })
}

fn evaluate(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    tol: f64,
    entropy: bool,
) -> Result<Vec<f64>, DpError> {
    if !(tol > 0.0) {
        return Err(DpError::Argument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let (ns, na, g) = (mdp.n_states(), mdp.n_actions(), mdp.discount());
    // Expected one-step reward under π, plus the entropy bonus for the soft variant.
    let r_pi: Vec<f64> = (0..ns)
        .map(|s| {
            (0..na)
                .map(|a| {
                    let p = policy.prob(s, a);
                    if p == 0.0 {
                        0.0
                    } else if entropy {
                        p * (mdp.reward_at(s, a) - p.ln())
                    } else {
                        p * mdp.reward_at(s, a)
                    }
                })
                .sum()
        })
        .collect();
    let mut v = vec![0.0; ns];
    for _ in 0..ORACLE_MAX_ITERS {
        let next: Vec<f64> = (0..ns)
            .map(|s| {
                r_pi[s]
                    + g * (0..na)
                        .map(|a| policy.prob(s, a) * mdp.kernel().expect(s, a, &v))
                        .sum::<f64>()
            })
            .collect();
        let delta = sup_diff(&next, &v);
        v = next;
        if g * delta <= tol {
            return Ok(v);
        }
    }
    Err(DpError::IterationLimit {
        iterations: ORACLE_MAX_ITERS,
        residual: f64::NAN,
    })
}

/// Expected discounted return `V^π(s)` by iterative policy evaluation.
pub fn policy_value(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    tol: f64,
) -> Result<Vec<f64>, DpError> {
    evaluate(mdp, policy, tol, false)
}

/// Entropy-regularised value of `π`: `E[Σ γ^t (R(s_t,a_t) - log π(a_t|s_t))]`.
pub fn soft_policy_value(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    tol: f64,
) -> Result<Vec<f64>, DpError> {
    evaluate(mdp, policy, tol, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Kernel;
    use crate::rng::rng_from_seed;

    fn one_state(n_actions: usize, reward: f64, discount: f64) -> TabularMdp {
        let k = Kernel::new(1, n_actions, vec![1.0; n_actions]).unwrap();
        TabularMdp::new(k, vec![reward; n_actions], discount, vec![1.0], 1.0).unwrap()
    }

    #[test]
    fn single_state_fixed_points() {
        let sv = soft_value_iteration(&one_state(1, 1.0, 0.5), 1e-12, 10_000).unwrap();
        assert!((sv.q[0] - 2.0).abs() < 1e-10);
        assert!((sv.v[0] - 2.0).abs() < 1e-10);
        assert!(sv.adv[0].abs() < 1e-12);

        // γ = 0 is outside the type's discount range, so use the smallest positive one.
        let sv = soft_value_iteration(&one_state(2, 0.0, 1e-300), 1e-12, 10).unwrap();
        let ln2 = 2f64.ln();
        assert!(sv.q.iter().all(|q| q.abs() < 1e-12));
        assert!((sv.v[0] - ln2).abs() < 1e-12);
        assert!(sv.adv.iter().all(|a| (a + ln2).abs() < 1e-12));

        let hv = hard_value_iteration(&one_state(1, 1.0, 0.5), 1e-12, 10_000).unwrap();
        assert!((hv.v[0] - 2.0).abs() < 1e-10);
        let hv = hard_value_iteration(&one_state(3, 0.0, 0.9), 1e-12, 10_000).unwrap();
        assert!(hv.v.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn iteration_limit_reports_residual() {
        let mut rng = rng_from_seed(1);
        let mdp = TabularMdp::random(3, 2, 0.99, &mut rng);
        match soft_value_iteration(&mdp, 1e-12, 5) {
            Err(DpError::IterationLimit {
                iterations,
                residual,
            }) => {
                assert_eq!(iterations, 5);
                assert!(residual > 1e-12);
            }
            other => panic!("expected iteration limit, got {other:?}"),
        }
        assert!(soft_value_iteration(&mdp, 0.0, 5).is_err());
    }

    #[test]
    fn matches_long_run_reference() {
        let mut rng = rng_from_seed(6);
        let mdp = TabularMdp::random(6, 3, 0.9, &mut rng);
        let sv = soft_value_iteration(&mdp, 1e-10, ORACLE_MAX_ITERS).unwrap();
        let mut q = vec![0.0; 18];
        for _ in 0..100_000 {
            q = soft_bellman_backup(&mdp, &q);
        }
        assert!(sup_diff(&q, &sv.q) < 1e-8);
        assert!(sv.residual <= 1e-10);
    }

    #[test]
    fn value_invariants_hold() {
        let mut rng = rng_from_seed(8);
        let mdp = TabularMdp::random(5, 4, 0.95, &mut rng);
        let sv = soft_value_iteration_oracle(&mdp).unwrap();
        for s in 0..5 {
            let row = &sv.q[s * 4..s * 4 + 4];
            assert!((sv.v[s] - logsumexp(row)).abs() < 1e-12);
            let mass: f64 = (0..4).map(|a| sv.adv_at(s, a).exp()).sum();
            assert!((mass - 1.0).abs() < 1e-10);
            for a in 0..4 {
                assert_eq!(sv.adv_at(s, a), sv.q_at(s, a) - sv.v[s]);
            }
        }
    }

    #[test]
    fn residual_decreases_after_first_sweep() {
        for seed in 0..20 {
            let mut rng = rng_from_seed(seed);
            let mdp = TabularMdp::random(6, 3, 0.9, &mut rng);
            let mut q = vec![0.0; 18];
            let mut prev = f64::INFINITY;
            for sweep in 0..200 {
                let next = soft_bellman_backup(&mdp, &q);
                let r = sup_diff(&next, &q);
                if sweep > 0 && r > 1e-13 {
                    assert!(r <= prev * (1.0 + 1e-12), "seed {seed} sweep {sweep}");
                }
                prev = r;
                q = next;
            }
        }
    }

    #[test]
    fn soft_optimal_policy_examples() {
        let make = |adv: Vec<f64>| SoftValues {
            n_states: 1,
            n_actions: 2,
            q: adv.clone(),
            v: vec![0.0],
            adv,
            residual: 0.0,
            iterations: 0,
        };
        let half = -(2f64.ln());
        let p = soft_optimal_policy(&make(vec![half, half]));
        assert!((p.prob(0, 0) - 0.5).abs() < 1e-15);
        let p = soft_optimal_policy(&make(vec![0.0, -1e9]));
        assert!((p.prob(0, 0) - 1.0).abs() < 1e-15 && p.prob(0, 1) < 1e-300);
        let p = soft_optimal_policy(&make(vec![0.7f64.ln(), 0.3f64.ln()]));
        assert!((p.prob(0, 0) - 0.7).abs() < 1e-12);
        assert!((p.prob(0, 1) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn soft_value_equals_entropy_regularised_evaluation() {
        for seed in 0..10 {
            let mut rng = rng_from_seed(100 + seed);
            let mdp = TabularMdp::random(5, 3, 0.9, &mut rng);
            let sv = soft_value_iteration_oracle(&mdp).unwrap();
            let pi = soft_optimal_policy(&sv);
            let v = soft_policy_value(&mdp, &pi, ORACLE_TOL).unwrap();
            assert!(sup_diff(&v, &sv.v) <= 10.0 * ORACLE_TOL, "seed {seed}");
        }
    }

    /// Every deterministic policy evaluated with an exact linear solve; the optimum
    /// dominates all others in every state.
    fn brute_force_optimal(mdp: &TabularMdp) -> Vec<usize> {
        use nalgebra::{DMatrix, DVector};
        let (ns, na, g) = (mdp.n_states(), mdp.n_actions(), mdp.discount());
        let mut best: Option<(Vec<usize>, DVector<f64>)> = None;
        for code in 0..na.pow(ns as u32) {
            let actions: Vec<usize> = (0..ns).map(|s| (code / na.pow(s as u32)) % na).collect();
            let mut m = DMatrix::<f64>::identity(ns, ns);
            let mut r = DVector::<f64>::zeros(ns);
            for s in 0..ns {
                r[s] = mdp.reward_at(s, actions[s]);
                for s1 in 0..ns {
                    m[(s, s1)] -= g * mdp.kernel().prob(s, actions[s], s1);
                }
            }
            let v = m.lu().solve(&r).unwrap();
            let better = match &best {
                None => true,
                Some((_, bv)) => {
                    v.iter().zip(bv.iter()).all(|(a, b)| *a >= b - 1e-12)
                        && v.iter().zip(bv.iter()).any(|(a, b)| *a > b + 1e-12)
                }
            };
            if better {
                best = Some((actions, v));
            }
        }
        best.unwrap().0
    }

    #[test]
    fn hard_greedy_matches_enumeration_oracle() {
        for seed in 0..5 {
            let mut rng = rng_from_seed(40 + seed);
            let mdp = TabularMdp::random(5, 2, 0.9, &mut rng);
            let hv = hard_value_iteration(&mdp, ORACLE_TOL, ORACLE_MAX_ITERS).unwrap();
            let greedy: Vec<usize> = (0..5).map(|s| hv.greedy_policy().greedy(s)).collect();
            assert_eq!(greedy, brute_force_optimal(&mdp), "seed {seed}");
        }
    }

    #[test]
    fn soft_argmax_approaches_hard_argmax_at_low_temperature() {
        for seed in 0..10 {
            let mut rng = rng_from_seed(70 + seed);
            let base = TabularMdp::random(5, 3, 0.9, &mut rng);
            let scaled = base
                .with_reward(base.reward().iter().map(|r| r * 1e3).collect())
                .unwrap();
            let hv = hard_value_iteration(&base, ORACLE_TOL, ORACLE_MAX_ITERS).unwrap();
            let sv = soft_value_iteration(&scaled, 1e-7, ORACLE_MAX_ITERS).unwrap();
            let pi = soft_optimal_policy(&sv);
            for s in 0..5 {
                let row = &hv.q[s * 3..s * 3 + 3];
                let best = argmax(row);
                let unique = row
                    .iter()
                    .enumerate()
                    .all(|(a, q)| a == best || *q < row[best] - 1e-9);
                if unique {
                    assert_eq!(pi.greedy(s), best, "seed {seed} state {s}");
                }
            }
        }
    }

    #[test]
    fn policy_value_examples() {
        let mut rng = rng_from_seed(3);
        let base = TabularMdp::random(4, 2, 0.8, &mut rng);
        let c = 0.7;
        let mdp = base.with_reward(vec![c; 8]).unwrap();
        let v = policy_value(&mdp, &TabularPolicy::uniform(4, 2), 1e-12).unwrap();
        assert!(v.iter().all(|x| (x - c / 0.2).abs() < 1e-9));

        // 0 → 1 → 2 (absorbing, zero reward); rewards 1 and 2 on the way.
        let k = Kernel::new(3, 1, vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        let chain = TabularMdp::new(k, vec![1.0, 2.0, 0.0], 0.5, vec![1.0, 0.0, 0.0], 2.0).unwrap();
        let v = policy_value(&chain, &TabularPolicy::uniform(3, 1), 1e-14).unwrap();
        assert!((v[0] - (1.0 + 0.5 * 2.0)).abs() < 1e-12);
        assert!((v[1] - 2.0).abs() < 1e-12);
        assert!(v[2].abs() < 1e-12);
    }

    #[test]
    fn policy_value_matches_linear_solve() {
        use nalgebra::{DMatrix, DVector};
        let mut rng = rng_from_seed(12);
        let mdp = TabularMdp::random(6, 3, 0.9, &mut rng);
        let pi = TabularPolicy::from_unnormalized(
            6,
            3,
            (0..18).map(|i| ((i * 7) % 5 + 1) as f64).collect(),
        )
        .unwrap();
        let v = policy_value(&mdp, &pi, 1e-12).unwrap();
        let mut m = DMatrix::<f64>::identity(6, 6);
        let mut r = DVector::<f64>::zeros(6);
        for s in 0..6 {
            for a in 0..3 {
                r[s] += pi.prob(s, a) * mdp.reward_at(s, a);
                for s1 in 0..6 {
                    m[(s, s1)] -= 0.9 * pi.prob(s, a) * mdp.kernel().prob(s, a, s1);
                }
            }
        }
        let exact = m.lu().solve(&r).unwrap();
        for s in 0..6 {
            assert!((v[s] - exact[s]).abs() < 1e-8);
        }
    }
}
