//! Model-enhanced adversarial inverse reinforcement learning at desk scale.
//!
//! The crate is organised bottom-up:
//!
//! - [`mdp`]: finite stochastic MDPs, the gridworld and point-mass benchmarks,
//!   trajectory sampling and the demonstration file format.
//! - [`soft_dp`]: exact soft and hard dynamic programming, the oracle for everything else.
//! - [`shaping`]: model-enhanced potential shaping and its advantage-invariance checks.
//! - [`dynamics`]: count-based and Gaussian transition models, TV distance, synthetic rollouts.
//! - [`neural`]: a small MLP / Adam substrate with exact reverse-mode gradients.
//! - [`adversarial`]: the discriminator, its loss, reward extraction and the MCE-IRL gradient.
//! - [`policy_opt`]: soft policy updates (tabular) and a minimal soft actor-critic.
//! - [`meairl`]: the end-to-end training loop with real and synthetic replay.
//! - [`theory`]: reward-error and performance-difference bounds and their verifiers.
//! - [`harness`]: configuration, experiment orchestration and CSV artifacts behind the CLI.

pub mod adversarial;
pub mod dynamics;
pub mod harness;
pub mod mdp;
pub mod meairl;
pub mod neural;
pub mod policy_opt;
pub mod rng;
pub mod shaping;
pub mod soft_dp;
pub mod theory;

pub use mdp::{Kernel, TabularMdp, TabularPolicy, Trajectory};
pub use soft_dp::{HardValues, SoftValues};
