//! Seed derivation shared by every command.
//!
//! Stream `i` of master seed `s` is seeded with
//! `splitmix64(s ^ splitmix64(i + 0x9E3779B97F4A7C15))`, and the resulting
//! 64-bit value feeds `ChaCha8Rng::seed_from_u64`. Episode `i` of a batch
//! always uses stream `i`, so every policy in a comparison sees the same
//! random numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream.wrapping_add(GOLDEN)))
}

pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream))
}
