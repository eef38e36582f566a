//! Seeded random substreams.
//!
//! Every stochastic element draws from a ChaCha stream keyed by
//! `(run seed, stream id, index)`, so a frame renders the same noise no
//! matter which other frames were rendered before it (or on which thread).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream identifiers. Distinct constants keep sensor noise independent.
pub mod stream {
    pub const STEMS: u64 = 0x5354_454d;
    pub const CANOPY: u64 = 0x4341_4e4f;
    pub const LIDAR: u64 = 0x4c49_4441;
    pub const THERMAL: u64 = 0x5448_4552;
    pub const HT: u64 = 0x4854_5345;
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn substream_seed(seed: u64, stream: u64, index: u64) -> u64 {
    mix64(mix64(mix64(seed) ^ stream) ^ index)
}

pub fn substream(seed: u64, stream: u64, index: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(substream_seed(seed, stream, index))
}

/// Uniform value in [0, 1) from a hash, 53 bits of mantissa.
pub fn unit_from_hash(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
