//! Deterministic seed derivation. Every stochastic stage draws from its own
//! stream, keyed by a base seed and a path of integer tags, so results do not
//! depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `tags` into `base`, producing an independent-looking child seed.
pub fn derive(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream tags used across the crate.
pub mod stream {
    pub const DESIGN: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const SURROGATE_DESIGN: u64 = 3;
    pub const SURROGATE_FIT: u64 = 4;
    pub const BANK: u64 = 5;
    pub const MAP_STARTS: u64 = 6;
    pub const ALPHA_CHAIN: u64 = 7;
    pub const LAMBDA_CHAIN: u64 = 8;
    pub const EMBEDDED_XI: u64 = 9;
    pub const EMBEDDED_CHAIN: u64 = 10;
    pub const FOLD: u64 = 11;
    pub const CONFIDENCE_BANK: u64 = 12;
}
