//! Deterministic random sub-streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! 64-bit seed, a stream label and a list of integer coordinates (replicate,
//! sample index, trial, ...). Two draws with the same coordinates are
//! bit-identical no matter in which order, or on which thread, they are
//! generated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed plus a stream label used to derive independent sub-streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngConfig {
    pub seed: u64,
    pub stream: String,
}

impl RngConfig {
    pub fn new(seed: u64, stream: impl Into<String>) -> Self {
        Self {
            seed,
            stream: stream.into(),
        }
    }

    /// A child configuration whose label extends this one.
    pub fn child(&self, label: &str) -> Self {
        Self {
            seed: self.seed,
            stream: format!("{}/{}", self.stream, label),
        }
    }

    /// Generator for the sub-stream at the given coordinates.
    pub fn substream(&self, coords: &[u64]) -> ChaCha8Rng {
        let mut state = splitmix64(self.seed ^ fnv1a(self.stream.as_bytes()));
        for &c in coords {
            state = splitmix64(state ^ splitmix64(c.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        }
        let mut key = [0u8; 32];
        for chunk in key.chunks_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
