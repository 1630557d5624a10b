//! Reproducible random streams for parallel Monte Carlo.
//!
//! Every stream is a ChaCha8 generator seeded from `(seed, index)` through a
//! SplitMix64 finaliser, so a lane or sweep cell always draws the same numbers
//! regardless of how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Recorded in output metadata.
pub const ALGORITHM: &str = "ChaCha8 (rand_chacha), per-stream seeds from SplitMix64(seed, index)";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derived 64-bit seed for sub-task `index` of `seed`.
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(index.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

/// Generator for stream `index` of `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let s = sub_seed(seed, index);
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_mut(8).enumerate() {
        chunk.copy_from_slice(&splitmix64(s.wrapping_add(i as u64)).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
