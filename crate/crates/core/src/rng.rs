//! Seed derivation and span sampling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a path of stream indices.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Stable 64-bit hash of a string (FNV-1a), used to turn names into stream ids.
pub fn stream_id(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws member indices without replacement until the pool is exhausted, then
/// with replacement.
#[derive(Debug, Clone)]
pub struct MemberSampler {
    order: Vec<usize>,
    next: usize,
    rng: ChaCha8Rng,
}

impl MemberSampler {
    pub fn new(len: usize, seed: u64) -> Self {
        assert!(len > 0, "sampler over an empty pool");
        let mut rng = rng(seed);
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut rng);
        MemberSampler { order, next: 0, rng }
    }

    pub fn draw(&mut self) -> usize {
        if self.next < self.order.len() {
            self.next += 1;
            self.order[self.next - 1]
        } else {
            self.rng.gen_range(0..self.order.len())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn twenty_members_sixteen_draws_are_distinct() {
        let mut s = MemberSampler::new(20, 7);
        let drawn: BTreeSet<usize> = (0..16).map(|_| s.draw()).collect();
        assert_eq!(drawn.len(), 16);
    }

    #[test]
    fn small_pool_is_exhausted_before_repeating() {
        let mut s = MemberSampler::new(3, 7);
        let first: BTreeSet<usize> = (0..3).map(|_| s.draw()).collect();
        assert_eq!(first.len(), 3);
        let rest: Vec<usize> = (0..13).map(|_| s.draw()).collect();
        assert!(rest.iter().all(|i| *i < 3));
    }

    #[test]
    fn derived_seeds_differ_per_path() {
        assert_ne!(derive_seed(1, &[0]), derive_seed(1, &[1]));
        assert_eq!(derive_seed(1, &[4, 2]), derive_seed(1, &[4, 2]));
    }
}
