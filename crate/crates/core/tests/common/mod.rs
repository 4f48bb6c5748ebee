//! Helpers shared by the integration tests.

use meairl_core::mdp::{make_noisy_pointmass, ContinuousTransition, DemoHeader, Demonstrations};
use meairl_core::rng::rng_from_seed;

/// Point-mass demonstrations from the saturated proportional controller `a = clip(-x)`,
/// which drives the state to the origin at the maximum rate.
pub fn controller_demos(noise_std: f64, episodes: usize, seed: u64) -> Demonstrations {
    let env = make_noisy_pointmass(noise_std).unwrap();
    let mut rng = rng_from_seed(seed);
    let mut transitions = Vec::new();
    for episode in 0..episodes {
        let mut x = env.reset(&mut rng);
        for t in 0..env.horizon {
            let a = env.clip_action(&[-x[0] * 10.0]);
            let next = env.step(&x, &a, &mut rng);
            transitions.push(ContinuousTransition {
                episode,
                t,
                state: x.clone(),
                action: a,
                next: next.clone(),
            });
            x = next;
        }
    }
    Demonstrations::Continuous {
        header: DemoHeader {
            env: "pointmass".into(),
            seed,
        },
        state_dim: 1,
        action_dim: 1,
        transitions,
    }
}
