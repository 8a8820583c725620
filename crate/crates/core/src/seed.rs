//! Hierarchical seeding.
//!
//! A master [`StreamSeed`] derives independent child seeds by label, so adding
//! draws to one purpose (say, episode sampling) never shifts another (say,
//! class generation).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The random stream used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Well-known purpose labels for first-level substreams.
pub mod purpose {
    pub const ENVIRONMENT: u64 = 0x656e_7669;
    pub const CLASS: u64 = 0x636c_6173;
    pub const EPISODES: u64 = 0x6570_6973;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StreamSeed(pub u64);

impl StreamSeed {
    pub const fn new(seed: u64) -> Self {
        StreamSeed(seed)
    }

    /// Derive the child stream for `label`.
    pub fn child(self, label: u64) -> Self {
        StreamSeed(splitmix64(self.0 ^ splitmix64(label.wrapping_add(0x9e37_79b9_7f4a_7c15))))
    }

    /// Convenience for two-level derivations such as `(iteration, line)`.
    pub fn child2(self, a: u64, b: u64) -> Self {
        self.child(a).child(b)
    }

    pub fn rng(self) -> SimRng {
        SimRng::seed_from_u64(self.0)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
