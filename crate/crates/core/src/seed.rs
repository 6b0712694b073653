//! Deterministic seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha generator whose seed is
//! derived from a user-supplied master seed plus a tag, so independent
//! components (fold plans, trees, simulated samples) never share a stream and
//! results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Child seed for a named purpose.
pub fn derive(master: u64, tag: &str) -> u64 {
    splitmix64(master ^ splitmix64(fnv1a(tag.as_bytes())))
}

/// Child seed for the `index`-th member of a family (tree, learner, fold).
pub fn derive_index(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master).wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03)))
}

/// General-purpose generator.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Counter-based substream: same key, different `stream` gives independent
/// sequences.
pub fn stream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}
