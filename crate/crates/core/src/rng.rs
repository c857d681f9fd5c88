//! Counter-based substream derivation.
//!
//! Every random quantity in the crate is drawn from a stream identified by a
//! `(seed, index)` pair. The stream seed is `mix64(seed, index)`, a pure
//! function, so replications and dataset rows can be generated in any order
//! and on any number of threads with bit-identical results.
//!
//! `mix64` is two rounds of the SplitMix64 finalizer:
//!
//! ```text
//! avalanche(z) = z ^= z >> 30; z *= 0xbf58476d1ce4e5b9;
//!                z ^= z >> 27; z *= 0x94d049bb133111eb; z ^ (z >> 31)
//! mix64(s, i)  = avalanche(avalanche(s) + 0x9e3779b97f4a7c15 * (i + 1))
//! ```
//!
//! The derived seed initializes a Xoshiro256++ generator via
//! `SeedableRng::seed_from_u64`.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
pub fn avalanche(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
pub fn mix64(seed: u64, index: u64) -> u64 {
    avalanche(avalanche(seed).wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1))))
}

/// Generator for substream `index` of `seed`.
#[inline]
pub fn substream(seed: u64, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(mix64(seed, index))
}

/// Generator seeded directly from a (already derived) seed.
#[inline]
pub fn stream(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

/// Tags separating independent streams that share a user seed.
pub mod tag {
    pub const X_SIDE: u64 = 0x5853_4944_4500_0001;
    pub const Y_SIDE: u64 = 0x5953_4944_4500_0002;
    pub const BOOT: u64 = 0x424f_4f54_0000_0003;
    pub const FAMILY: u64 = 0x4641_4d49_4c59_0004;
    pub const INTERP_GAUSS: u64 = 0x494e_5447_0000_0005;
    pub const SCAN: u64 = 0x5343_414e_0000_0006;
    pub const SUBSETS: u64 = 0x5355_4253_0000_0007;
    pub const CHECK: u64 = 0x4348_4b00_0000_0008;
    pub const SMOOTH: u64 = 0x534d_4f4f_5448_0009;
}
