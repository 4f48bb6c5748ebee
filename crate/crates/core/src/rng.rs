//! Seeded random number generation.
//!
//! Every stochastic routine in the crate takes either an explicit `u64` seed or a
//! caller-owned [`SeededRng`]. There is no global generator.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator for a named sub-stream of one seed.
///
/// Streams never overlap, so consuming draws from one stream cannot shift the
/// draws seen by another.
pub fn stream(seed: u64, stream_id: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Indices for a batch of `n` drawn uniformly from `0..len`.
///
/// Without replacement when `n <= len`, with replacement otherwise.
pub fn sample_indices<R: Rng + ?Sized>(len: usize, n: usize, rng: &mut R) -> Vec<usize> {
    assert!(len > 0, "cannot sample from an empty collection");
    if n <= len {
        index::sample(rng, len, n).into_vec()
    } else {
        (0..n).map(|_| rng.random_range(0..len)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_independent_and_reproducible() {
        let a: Vec<u64> = (0..4)
            .map({
                let mut r = stream(7, 1);
                move |_| r.random()
            })
            .collect();
        let b: Vec<u64> = (0..4)
            .map({
                let mut r = stream(7, 1);
                move |_| r.random()
            })
            .collect();
        let c: Vec<u64> = (0..4)
            .map({
                let mut r = stream(7, 2);
                move |_| r.random()
            })
            .collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn index_sampling_rules() {
        let mut rng = rng_from_seed(3);
        let mut idx = sample_indices(10, 10, &mut rng);
        idx.sort();
        assert_eq!(idx, (0..10).collect::<Vec<_>>());
        let idx = sample_indices(3, 50, &mut rng);
        assert_eq!(idx.len(), 50);
        assert!(idx.iter().all(|&i| i < 3));
    }
}
