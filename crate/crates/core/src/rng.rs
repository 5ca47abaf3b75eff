//! Seed derivation for reproducible, thread-count independent randomness.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded from a 64-bit
//! value obtained by [`derive_seed`]. The mixing function is SplitMix64's
//! finaliser applied in a fixed chain:
//!
//! ```text
//! seed = mix(mix(mix(base) ^ index) ^ tag)
//! ```
//!
//! where `tag` is the stream's [`StreamTag`] constant. Trials never share a
//! generator, so any schedule of worker threads produces the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Logical random streams of a Monte Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamTag {
    Codebook,
    ActiveSet,
    Noise,
    Auxiliary,
}

impl StreamTag {
    const fn constant(self) -> u64 {
        match self {
            StreamTag::Codebook => 0x636f_6465_626f_6f6b,
            StreamTag::ActiveSet => 0x6163_7469_7665_7365,
            StreamTag::Noise => 0x6e6f_6973_6500_0001,
            StreamTag::Auxiliary => 0x6175_7869_6c69_6172,
        }
    }
}

/// SplitMix64 finaliser.
pub const fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub const fn derive_seed(base: u64, index: u64, tag: StreamTag) -> u64 {
    mix64(mix64(mix64(base) ^ index) ^ tag.constant())
}

pub fn stream(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

pub fn derived_stream(base: u64, index: u64, tag: StreamTag) -> StreamRng {
    stream(derive_seed(base, index, tag))
}
