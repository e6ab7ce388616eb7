//! Derived random streams.
//!
//! Every random draw in the crate comes from a [`StreamRng`] built from a
//! [`Seed`]. Parallel work never shares a generator: each job derives its own
//! seed from the parent seed and a stable key (replicate index, purpose tag),
//! so results do not depend on how jobs are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

/// A 64-bit seed that can spawn independent child seeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

/// Purpose tags used as child keys. Keeping them in one place makes the
/// stream layout of the engines easy to audit.
pub mod purpose {
    pub const OBSERVED: u64 = 0x6f62_7365_7276_6564;
    pub const NULL_REPLICATE: u64 = 0x6e75_6c6c;
    pub const NULL_DATA: u64 = 0x6461_7461;
    pub const NULL_LABELS: u64 = 0x6c61_6265_6c73;
    pub const NULL_ASSIGN: u64 = 0x6173_7369_676e;
    pub const GENERATE: u64 = 0x6765_6e65_7261_7465;
    pub const METHOD: u64 = 0x6d65_7468_6f64;
    pub const RESTART: u64 = 0x72_6573_7461_7274;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Seed {
    pub fn child(self, key: u64) -> Seed {
        Seed(splitmix64(self.0 ^ splitmix64(key)))
    }

    pub fn rng(self) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}
