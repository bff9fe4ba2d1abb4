//! Seed derivation.
//!
//! A single master seed is split into independent streams by hashing it with
//! a stream label, so that every stage can be rerun on its own and still see
//! exactly the random numbers it would have seen inside a full run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream labels used by the pipeline.
pub mod stream {
    pub const TEACHER: u64 = 1;
    pub const DATASET: u64 = 2;
    pub const GMM: u64 = 3;
    pub const DISTILL_ENV: u64 = 4;
    pub const DISTILL_REPLAY: u64 = 5;
    pub const DISTILL_EXPLORE: u64 = 6;
    pub const EVAL: u64 = 7;
    pub const NAIVE: u64 = 8;
    pub const HOLDOUT: u64 = 9;
    pub const FINAL_EVAL: u64 = 10;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` for the given stream label.
pub fn derive(parent: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(stream.wrapping_mul(0x2545_f491_4f6c_dd1d)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
