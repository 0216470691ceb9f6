//! Deterministic, index-addressed randomness.
//!
//! Perturbations of pseudo-orbits are drawn from a stream keyed by
//! `(seed, node path)` rather than from a sequential generator, so a node's
//! value does not depend on the order in which the tree is explored or on
//! the number of worker threads. The mixing function is SplitMix64's
//! finaliser; its identifier is recorded in run metadata and must change if
//! the algorithm ever does.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier of the perturbation stream written into output metadata.
pub const PERTURBATION_STREAM: &str = "splitmix64-path-v1";

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of the child node reached from `parent` by applying `letter`.
#[inline]
pub fn child_key(parent: u64, letter: u8) -> u64 {
    splitmix64(parent ^ (u64::from(letter) + 1).wrapping_mul(GOLDEN))
}

/// Uniform sample in `[0, 1)` for the node `key` under `seed`, using the top
/// 53 bits.
#[inline]
pub fn unit(seed: u64, key: u64) -> f64 {
    let bits = splitmix64(splitmix64(seed) ^ key) >> 11;
    bits as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform sample in `[-alpha, alpha]` for the node `key`.
#[inline]
pub fn symmetric(seed: u64, key: u64, alpha: f64) -> f64 {
    alpha * (2.0 * unit(seed, key) - 1.0)
}

/// Derives a sub-seed, e.g. one per pool member.
#[inline]
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x5EED)))
}

/// Sequential generator for sampling tasks (validation samples, random
/// test pairs). ChaCha8 output is stable across platforms and releases.
pub fn sampler(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
