//! Seed fan-out.
//!
//! A master seed is expanded into per-component seeds by hashing it together
//! with a path of integer tags (component, scenario index, …). Adding a new
//! component or scenario never shifts the seeds of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a tag path.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &tag| splitmix64(acc ^ splitmix64(tag)))
}

/// Stable tags for the simulation components.
pub mod tag {
    pub const BOB: u64 = 1;
    pub const MALLORY: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const SPEED: u64 = 4;
    pub const TRAIN: u64 = 5;
    pub const TEST: u64 = 6;
    pub const INIT: u64 = 7;
    pub const SHUFFLE: u64 = 8;
    pub const VALIDATION: u64 = 9;
}
