//! Deterministic seed splitting.
//!
//! A run has one named seed. Every stage that draws random numbers derives
//! its own generator from `(seed, stage label, index)`, so adding draws to one
//! stage never shifts the stream seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator type used across the crate.
pub type StageRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a 64-bit seed for a labelled stage.
pub fn stage_seed(seed: u64, label: &str, index: u64) -> u64 {
    // FNV-1a over the label, then mixed with the seed and index.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(splitmix64(seed ^ h).wrapping_add(index))
}

/// Generator for a labelled stage.
pub fn stage_rng(seed: u64, label: &str, index: u64) -> StageRng {
    StageRng::seed_from_u64(stage_seed(seed, label, index))
}
