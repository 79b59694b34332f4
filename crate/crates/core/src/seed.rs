//! Seeded random streams.
//!
//! Every stochastic routine takes either an explicit seed or a caller-owned
//! RNG. Independent streams (replicates, chains, Monte-Carlo shards) are
//! derived with [`split_seed`]: the base seed is XOR-ed with the stream index
//! and passed through the SplitMix64 finalizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type Rng = ChaCha8Rng;

/// Stream tags used when one base seed feeds several independent purposes.
pub mod stream {
    pub const DATA: u64 = 0x0D47_A000;
    pub const CHAIN: u64 = 0xC4A1_0000;
    pub const INIT: u64 = 0x1417_0000;
    pub const DISTANCE: u64 = 0xD157_0000;
    pub const NORMALIZER: u64 = 0x9042_0000;
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `index` derived from `seed`: `mix64(seed ^ index)`.
#[inline]
pub fn split_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ index)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// RNG for stream `index` of `seed`.
pub fn stream_rng(seed: u64, index: u64) -> Rng {
    rng_from_seed(split_seed(seed, index))
}
