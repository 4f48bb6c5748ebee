//! Model-enhanced potential shaping and advantage-invariance checks.
//!
//! `R̂(s,a) = R(s,a) + γ·Σ_{s'} T(s'|s,a)·φ(s') − φ(s)`, where the expectation is taken
//! under a supplied kernel: the true one, or a learned estimate.

use std::hash::{Hash, Hasher};

use thiserror::Error;

use crate::mdp::{Kernel, MdpError, TabularMdp};
use crate::soft_dp::{soft_value_iteration, DpError, SoftValues, ORACLE_MAX_ITERS, ORACLE_TOL};

#[derive(Debug, Error)]
pub enum ShapingError {
    #[error("potential has {got} entries, MDP has {expected} states")]
    PotentialShape { expected: usize, got: usize },
    #[error("potential entry {0} is not finite")]
    NonFinitePotential(usize),
    #[error("dynamics do not match the MDP: {0}")]
    Dynamics(#[from] MdpError),
    #[error(transparent)]
    Dp(#[from] DpError),
}

/// State potential `φ: S → ℝ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential(Vec<f64>);

impl Potential {
    pub fn new(values: Vec<f64>) -> Result<Self, ShapingError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ShapingError::NonFinitePotential(i));
        }
        Ok(Self(values))
    }

    pub fn zeros(n_states: usize) -> Self {
        Self(vec![0.0; n_states])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Content fingerprint of a float table, used to tag shaped rewards with their inputs.
pub fn fingerprint(values: &[f64]) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for v in values {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub base_reward: u64,
    pub potential: u64,
    pub dynamics: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapedReward {
    pub table: Vec<f64>,
    pub provenance: Provenance,
}

pub fn shape_reward(
    mdp: &TabularMdp,
    phi: &Potential,
    dynamics: &Kernel,
) -> Result<ShapedReward, ShapingError> {
    shape_table(mdp, mdp.reward(), phi, dynamics)
}

/// Shapes an arbitrary reward table living on `mdp`'s state-action space.
pub fn shape_table(
    mdp: &TabularMdp,
    reward: &[f64],
    phi: &Potential,
    dynamics: &Kernel,
) -> Result<ShapedReward, ShapingError> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    if phi.0.len() != ns {
        return Err(ShapingError::PotentialShape {
            expected: ns,
            got: phi.0.len(),
        });
    }
    if dynamics.n_states() != ns || dynamics.n_actions() != na {
        return Err(MdpError::Shape {
            what: "shaping dynamics",
            expected: ns * na * ns,
            got: dynamics.as_slice().len(),
        }
        .into());
    }
    // Kernel construction already guarantees stochastic rows.
    let g = mdp.discount();
    let table = (0..ns * na)
        .map(|i| {
            let (s, a) = (i / na, i % na);
            reward[i] + g * dynamics.expect(s, a, &phi.0) - phi.0[s]
        })
        .collect();
    Ok(ShapedReward {
        table,
        provenance: Provenance {
            base_reward: fingerprint(reward),
            potential: fingerprint(&phi.0),
            dynamics: fingerprint(dynamics.as_slice()),
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    /// `max |A_{r1} − A_{r2}|`, the quantity invariance is judged on.
    pub max_advantage_gap: f64,
    /// `max |Q_{r1} − Q_{r2}|`; differs by the potential, for diagnostics only.
    pub max_q_gap: f64,
    pub tol: f64,
    pub passed: bool,
}

fn soft_values_for(mdp: &TabularMdp, reward: &[f64]) -> Result<SoftValues, ShapingError> {
    soft_values_at(mdp, reward, ORACLE_TOL)
}

fn soft_values_at(mdp: &TabularMdp, reward: &[f64], tol: f64) -> Result<SoftValues, ShapingError> {
    Ok(soft_value_iteration(
        &mdp.with_reward(reward.to_vec())?,
        tol,
        ORACLE_MAX_ITERS,
    )?)
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Compares the soft advantages induced by two rewards under `mdp`'s kernel.
pub fn check_policy_invariance(
    mdp: &TabularMdp,
    r1: &[f64],
    r2: &[f64],
    tol: f64,
) -> Result<InvarianceReport, ShapingError> {
    let a = soft_values_for(mdp, r1)?;
    let b = soft_values_for(mdp, r2)?;
    let max_advantage_gap = sup_gap(&a.adv, &b.adv);
    Ok(InvarianceReport {
        max_advantage_gap,
        max_q_gap: sup_gap(&a.q, &b.q),
        tol,
        passed: max_advantage_gap <= tol,
    })
}

/// `max_{s,a} |Q_R(s,a) − Q_{R̂}(s,a) − φ(s)|` with `R̂` shaped under `shaping_kernel`
/// and both soft Q tables solved under the MDP's own kernel.
///
/// Both tables are solved to Bellman residual `tol`, so when `shaping_kernel` is the true
/// one the gap is solver error alone, at most `2·tol/(1−γ)`.
pub fn q_shift_identity_gap(
    mdp: &TabularMdp,
    phi: &Potential,
    shaping_kernel: &Kernel,
    tol: f64,
) -> Result<f64, ShapingError> {
    let shaped = shape_reward(mdp, phi, shaping_kernel)?;
    let base = soft_values_at(mdp, mdp.reward(), tol)?;
    let shifted = soft_values_at(mdp, &shaped.table, tol)?;
    let na = mdp.n_actions();
    Ok(base
        .q
        .iter()
        .zip(&shifted.q)
        .enumerate()
        .map(|(i, (q, qs))| (q - qs - phi.0[i / na]).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::tv_distance;
    use crate::mdp::{normalize, random_simplex};
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn random_phi(n: usize, scale: f64, rng: &mut impl Rng) -> Potential {
        Potential::new((0..n).map(|_| rng.random_range(-scale..=scale)).collect()).unwrap()
    }

    /// Mix every row with a fresh Dirichlet row at rate `lambda`.
    fn perturbed(kernel: &Kernel, lambda: f64, rng: &mut impl Rng) -> Kernel {
        let ns = kernel.n_states();
        let mut probs = kernel.as_slice().to_vec();
        for row in probs.chunks_mut(ns) {
            let noise = random_simplex(ns, rng);
            for (p, q) in row.iter_mut().zip(noise) {
                *p = (1.0 - lambda) * *p + lambda * q;
            }
            normalize(row);
        }
        Kernel::new(ns, kernel.n_actions(), probs).unwrap()
    }

    #[test]
    fn trivial_potentials() {
        let mut rng = rng_from_seed(2);
        let mdp = TabularMdp::random(4, 2, 0.9, &mut rng);
        let r = shape_reward(&mdp, &Potential::zeros(4), mdp.kernel()).unwrap();
        assert_eq!(r.table, mdp.reward());
        let c = 2.5;
        let r = shape_reward(&mdp, &Potential::new(vec![c; 4]).unwrap(), mdp.kernel()).unwrap();
        for (shaped, base) in r.table.iter().zip(mdp.reward()) {
            assert!((shaped - (base - 0.1 * c)).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_dot_product() {
        let row = [0.2, 0.5, 0.3];
        let mut probs = Vec::new();
        for _ in 0..3 {
            probs.extend_from_slice(&row);
        }
        let k = Kernel::new(3, 1, probs).unwrap();
        let mdp = TabularMdp::new(k, vec![0.0; 3], 0.9, vec![1.0, 0.0, 0.0], 1.0).unwrap();
        let phi = Potential::new(vec![1.0, 2.0, 3.0]).unwrap();
        let r = shape_reward(&mdp, &phi, mdp.kernel()).unwrap();
        assert!((r.table[0] - 0.89).abs() < 1e-12);
    }

    #[test]
    fn shaped_reward_bound_and_provenance() {
        let mut rng = rng_from_seed(5);
        let mdp = TabularMdp::random(5, 3, 0.9, &mut rng);
        let phi = random_phi(5, 3.0, &mut rng);
        let r = shape_reward(&mdp, &phi, mdp.kernel()).unwrap();
        let bound = mdp.r_max() + 1.9 * phi.max_abs();
        assert!(r.table.iter().all(|x| x.abs() <= bound));
        assert_eq!(r.provenance.potential, fingerprint(phi.values()));
        let other = shape_reward(&mdp, &random_phi(5, 3.0, &mut rng), mdp.kernel()).unwrap();
        assert_ne!(r.provenance.potential, other.provenance.potential);
        assert_eq!(r.provenance.dynamics, other.provenance.dynamics);
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let mut rng = rng_from_seed(5);
        let mdp = TabularMdp::random(3, 2, 0.9, &mut rng);
        assert!(shape_reward(&mdp, &Potential::zeros(4), mdp.kernel()).is_err());
        let other = Kernel::random(4, 2, &mut rng);
        assert!(shape_reward(&mdp, &Potential::zeros(3), &other).is_err());
        assert!(Potential::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn invariance_examples() {
        let mut rng = rng_from_seed(13);
        let mdp = TabularMdp::random(5, 3, 0.9, &mut rng);
        let rep = check_policy_invariance(&mdp, mdp.reward(), mdp.reward(), 0.0).unwrap();
        assert_eq!(rep.max_advantage_gap, 0.0);
        assert!(rep.passed);

        let phi = random_phi(5, 1.0, &mut rng);
        let shaped = shape_reward(&mdp, &phi, mdp.kernel()).unwrap();
        let rep = check_policy_invariance(&mdp, mdp.reward(), &shaped.table, 1e-8).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.max_q_gap > 1e-3, "Q differs by the potential");

        let mut noisy = mdp.reward().to_vec();
        noisy[4] += 0.5;
        let rep = check_policy_invariance(&mdp, mdp.reward(), &noisy, 1e-6).unwrap();
        assert!(!rep.passed && rep.max_advantage_gap > 1e-3, "{rep:?}");
    }

    #[test]
    fn large_potentials_stay_invariant() {
        for seed in 0..10 {
            let mut rng = rng_from_seed(900 + seed);
            let mdp = TabularMdp::random(6, 3, 0.9, &mut rng);
            let phi = random_phi(6, 100.0, &mut rng);
            let shaped = shape_reward(&mdp, &phi, mdp.kernel()).unwrap();
            let rep = check_policy_invariance(&mdp, mdp.reward(), &shaped.table, 1e-8).unwrap();
            assert!(rep.passed, "seed {seed}: {rep:?}");
        }
    }

    #[test]
    fn q_shift_identity() {
        let mut rng = rng_from_seed(17);
        let mdp = TabularMdp::random(4, 2, 0.9, &mut rng);
        assert!(
            q_shift_identity_gap(&mdp, &Potential::zeros(4), mdp.kernel(), ORACLE_TOL).unwrap()
                < 1e-12
        );
        let phi = random_phi(4, 1.0, &mut rng);
        assert!(q_shift_identity_gap(&mdp, &phi, mdp.kernel(), ORACLE_TOL).unwrap() <= 1e-8);

        // Shaping under a kernel at TV distance 0.2 from the truth breaks the identity.
        let mut checked = 0;
        for seed in 0..200 {
            let mut rng = rng_from_seed(seed);
            let wrong = perturbed(mdp.kernel(), 0.5, &mut rng);
            let tv = tv_distance(mdp.kernel(), &wrong, None).max;
            if (tv - 0.2).abs() > 0.05 {
                continue;
            }
            checked += 1;
            assert!(q_shift_identity_gap(&mdp, &phi, &wrong, ORACLE_TOL).unwrap() > 1e-4);
        }
        assert!(checked > 0);
    }

    #[test]
    fn advantage_gap_shrinks_with_kernel_error() {
        let mut rng = rng_from_seed(23);
        let mdp = TabularMdp::random(5, 3, 0.9, &mut rng);
        let phi = random_phi(5, 1.0, &mut rng);
        let noise = perturbed(mdp.kernel(), 1.0, &mut rng);
        let mut last = f64::INFINITY;
        for lambda in [0.8, 0.4, 0.2, 0.1, 0.05, 0.0] {
            // Convex mixture between the truth and a fixed wrong kernel.
            let probs: Vec<f64> = mdp
                .kernel()
                .as_slice()
                .iter()
                .zip(noise.as_slice())
                .map(|(t, n)| (1.0 - lambda) * t + lambda * n)
                .collect();
            let mut probs = probs;
            probs.chunks_mut(5).for_each(normalize);
            let est = Kernel::new(5, 3, probs).unwrap();
            let shaped = shape_reward(&mdp, &phi, &est).unwrap();
            let gap = check_policy_invariance(&mdp, mdp.reward(), &shaped.table, 1e-8)
                .unwrap()
                .max_advantage_gap;
            assert!(gap <= last + 1e-12, "lambda {lambda}: {gap} > {last}");
            last = gap;
        }
        assert!(last <= 1e-8);
    }
}
