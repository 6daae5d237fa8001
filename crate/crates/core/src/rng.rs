//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit seed and draws from a ChaCha8
//! stream selected by a per-purpose stream id, so unrelated consumers of the
//! same seed never share random numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub mod streams {
    pub const SAMPLE: u64 = 1;
    pub const SPLIT_BIAS: u64 = 2;
    pub const SPLIT_REF: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const NET_INIT: u64 = 5;
    pub const HOLDOUT: u64 = 6;
    pub const BATCHES: u64 = 7;
    pub const GMM_INIT: u64 = 8;
    pub const GRAD_CHECK: u64 = 9;
    pub const GAN: u64 = 10;
    pub const MODEL_SAMPLE: u64 = 11;
    pub const LABELS: u64 = 12;
}

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives an independent child seed, e.g. one per experiment cell.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
