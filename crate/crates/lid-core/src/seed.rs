//! Deterministic seed derivation.
//!
//! Every random draw in the toolkit flows from one global `u64` seed.
//! Sub-seeds for independent purposes (corpus segments, model init, batch
//! shuffles, ...) are derived with splitmix64 so that results do not depend
//! on evaluation order or worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One splitmix64 step; a well-mixed stateless hash of a 64-bit value.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a sub-seed from a parent seed and a tag.
pub fn sub_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

/// Derives a sub-seed from a parent seed and a sequence of tags.
pub fn sub_seed_chain(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(seed, |acc, &t| sub_seed(acc, t))
}

/// Stable 64-bit hash of a string tag (FNV-1a). `DefaultHasher` is not
/// guaranteed stable across Rust releases, so we keep our own.
pub fn tag(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A seeded RNG for the given purpose tag.
pub fn rng_for(seed: u64, purpose: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(seed, tag(purpose)))
}

/// A seeded RNG for the given purpose and index path (e.g. per segment).
pub fn rng_for_indexed(seed: u64, purpose: &str, indices: &[u64]) -> ChaCha8Rng {
    let mut s = sub_seed(seed, tag(purpose));
    s = sub_seed_chain(s, indices);
    ChaCha8Rng::seed_from_u64(s)
}
