//! Seed handling. Every stochastic routine takes an explicit seed and builds
//! its own ChaCha stream, so results never depend on call order or threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a global seed, an item id and a stage tag into a child seed.
///
/// Stable across platforms and compiler versions (no `std` hasher involved).
pub fn derive_seed(global: u64, id: u64, tag: &str) -> u64 {
    let mut h = splitmix64(global);
    h = splitmix64(h ^ id);
    for chunk in tag.as_bytes().chunks(8) {
        let mut buf = [0u8; 8];
        buf[..chunk.len()].copy_from_slice(chunk);
        h = splitmix64(h ^ u64::from_le_bytes(buf));
    }
    h
}
