//! Seed derivation.
//!
//! Every random draw in the pipeline comes from a ChaCha stream whose seed is
//! derived from the run seed plus a tag path, e.g. `(scenario, STREAM_SMALL_SCALE, u, a)`.
//! Derivation folds each tag into the state with XOR followed by a splitmix64
//! finalizer, so `derive(base, &[u, a])` is `base ⊕ hash(u, a)` in spirit while
//! staying order sensitive.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const STREAM_PLACEMENT: u64 = 0x01;
pub const STREAM_SHADOWING: u64 = 0x02;
pub const STREAM_UAV_LINK: u64 = 0x03;
pub const STREAM_SMALL_SCALE: u64 = 0x04;
pub const STREAM_PILOTS: u64 = 0x05;
pub const STREAM_PILOT_NOISE: u64 = 0x06;
pub const STREAM_SCENARIO: u64 = 0x07;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `base` and an ordered list of tags.
pub fn derive(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_from(base: u64, tags: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive(base, tags))
}
