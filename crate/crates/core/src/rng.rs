//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream keyed by a tuple of
//! coordinates (seed, epoch, batch, sample, chain, ...). Streams never share
//! state, so results do not depend on evaluation order or thread count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream purposes, mixed into the key so that e.g. the shuffle stream of
/// epoch 3 never coincides with a sampling stream.
pub mod purpose {
    pub const DATA: u64 = 0x01;
    pub const SPLIT: u64 = 0x02;
    pub const INIT: u64 = 0x03;
    pub const SHUFFLE: u64 = 0x04;
    pub const CHAIN: u64 = 0x05;
    pub const PROBE: u64 = 0x06;
    pub const TRACE: u64 = 0x07;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream from a seed and a coordinate path.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    let mut key = [0u8; 32];
    let mut h = splitmix64(seed);
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        for &p in path {
            h = splitmix64(h ^ splitmix64(p.wrapping_add(i as u64)));
        }
        h = splitmix64(h ^ (path.len() as u64));
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Uniform index in `0..n` from exactly one 64-bit draw (multiply-shift).
///
/// The bias is at most `n / 2^64`, irrelevant for the tiny spaces used here,
/// and the fixed consumption keeps downstream draws aligned across runs.
pub fn index(rng: &mut impl RngCore, n: usize) -> usize {
    debug_assert!(n > 0);
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}

/// Uniform real in `[0, 1)` with 53 bits of precision, one 64-bit draw.
pub fn unit(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
