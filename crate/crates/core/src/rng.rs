//! Keyed random streams.
//!
//! Every random decision in the pipeline draws from a generator whose seed is
//! a hash of `(seed, key...)`. Streams for different patches, steps or runs
//! never share state, so work can be split across threads or resumed from a
//! checkpoint without replaying earlier draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a 64-bit key from a root seed and a path of integers.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(seed), |acc, &p| mix(acc ^ mix(p)))
}

/// Generator for the stream named by `path` under `seed`.
pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, path))
}

/// Stream tags, so that call sites with the same numeric path stay disjoint.
pub mod tag {
    pub const DOWNSAMPLE: u64 = 1;
    pub const UNIFORM_SEEDS: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const INIT: u64 = 4;
    pub const SAMPLING: u64 = 5;
    pub const JITTER: u64 = 6;
    pub const EVAL: u64 = 7;
}
