//! Seeded random streams.
//!
//! Every random decision in the pipeline flows from one `u64` seed through a
//! named sub-stream, so stages can be re-run independently and still
//! reproduce byte-identical artifacts. ChaCha8 keeps the streams portable
//! across platforms and library versions.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic RNG for one named stage of a run.
pub fn stream_rng(seed: u64, name: &str) -> ChaCha8Rng {
    // FNV-1a over the stream name, mixed with the run seed into 32 key bytes.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let m1 = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ h.rotate_left(17);
    let m2 = h.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ seed.rotate_left(31);

    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&h.to_le_bytes());
    key[16..24].copy_from_slice(&m1.to_le_bytes());
    key[24..32].copy_from_slice(&m2.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
