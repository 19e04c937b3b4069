//! Seed plumbing. Every random stream in the pipeline is a ChaCha8 generator
//! whose seed is derived from the run seed plus a fixed stream path, so results
//! never depend on call order across unrelated components.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of stream identifiers.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn seeded(seed: u64, path: &[u64]) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

// Stream identifiers.
pub const STREAM_INIT: u64 = 1;
pub const STREAM_BATCHES: u64 = 2;
pub const STREAM_NEGATIVES: u64 = 3;
pub const STREAM_SYNTH: u64 = 4;
pub const STREAM_DROPOUT: u64 = 5;
