//! Counter-based random streams.
//!
//! A stream is identified by `(seed, stream_id)`. The underlying generator is
//! ChaCha8 keyed by the seed with the stream id selecting one of its 2^64
//! independent streams, so the value at any position is a pure function of
//! `(seed, stream_id, counter)`. Sub-streams are derived by hashing the parent
//! id with a tag, which lets callers hand out one stream per candidate, per
//! draw or per step without sharing mutable state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub const fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Child stream for `tag`. Distinct tags give distinct stream ids with
    /// overwhelming probability; the mapping is fixed across platforms.
    pub fn derive(&self, tag: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: mix64(self.stream_id ^ mix64(tag.wrapping_add(0x9e37_79b9_7f4a_7c15))),
        }
    }

    /// Fresh generator positioned at counter 0 of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// 64-bit FNV-1a. Used where a hash must be stable across builds and
/// platforms (text embeddings, per-candidate stream ids).
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
