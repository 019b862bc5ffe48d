//! Deterministic, splittable random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream keyed by a
//! 64-bit seed and selected by a 64-bit stream id. Replicate `r` of cell `c` in
//! an experiment uses `derive_seed(master, &[c, r])`, so results do not depend
//! on how replicates are scheduled across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream carrying the Gaussian innovations of a path.
pub const STREAM_INNOVATIONS: u64 = 0;
/// Stream carrying the heavy-tailed noise `Z` (and any auxiliary law draws).
pub const STREAM_NOISE: u64 = 1;
/// Stream carrying the far-past remainder of an exact long-memory path.
pub const STREAM_FAR_PAST: u64 = 2;
/// Free stream for estimators and reference samplers.
pub const STREAM_AUX: u64 = 3;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a path of indices.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix64(master), |acc, &k| mix64(acc ^ mix64(k.wrapping_add(0x632B_E59B_D9B4_E019))))
}

/// Open stream `stream` of the generator keyed by `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut key = [0u8; 32];
    for (k, chunk) in key.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&mix64(seed.wrapping_add((k as u64).wrapping_mul(0xA076_1D64_78BD_642F))).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}
