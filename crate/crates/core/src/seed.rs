//! Deterministic child-seed derivation.
//!
//! Every randomized task in the workspace draws its RNG stream from a seed
//! derived as `child_seed(experiment_seed, &[domain, coordinates...])`.
//! Results are therefore identical for any degree of parallelism: a task's
//! stream depends only on its coordinates, never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keeping unrelated seed streams disjoint.
pub mod domain {
    pub const DATA: u64 = 0x01;
    pub const INIT: u64 = 0x02;
    pub const TRAIN: u64 = 0x03;
    pub const EMBED: u64 = 0x04;
    pub const GAUGE: u64 = 0x05;
    pub const SPLIT: u64 = 0x06;
    pub const EVAL: u64 = 0x07;
    pub const META: u64 = 0x08;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a coordinate path.
pub fn child_seed(parent: u64, tags: &[u64]) -> u64 {
    let mut acc = splitmix64(parent);
    for &t in tags {
        acc = splitmix64(acc ^ splitmix64(t));
    }
    acc
}

/// The seeded RNG used throughout the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
