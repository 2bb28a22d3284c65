//! Deterministic random substreams.
//!
//! A [`SeedTree`] node owns a 64-bit key. [`SeedTree::stream`] turns the key
//! into a ChaCha8 generator on a numbered stream, and [`SeedTree::child`]
//! derives an independent key for a nested task. Results therefore depend on
//! task indices only, never on which thread ran a task or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TaskRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedTree(u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        SeedTree(splitmix64(seed))
    }

    pub fn key(&self) -> u64 {
        self.0
    }

    /// Generator for substream `index` of this node.
    pub fn stream(&self, index: u64) -> TaskRng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.0.to_le_bytes());
        seed[8..16].copy_from_slice(&splitmix64(self.0).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(index);
        rng
    }

    /// Independent node for nested task `index`.
    pub fn child(&self, index: u64) -> SeedTree {
        SeedTree(splitmix64(self.0 ^ splitmix64(index.wrapping_add(0x6a09_e667_f3bc_c909))))
    }
}
