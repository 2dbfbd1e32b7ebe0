//! Counter-style random streams.
//!
//! Every random draw in the pipeline comes from a ChaCha8 stream keyed by a
//! tuple `(master_seed, group, index, sub_index)` plus a purpose tag. Streams
//! are therefore independent of scheduling: a worker computing row `i` gets
//! the same numbers no matter which thread runs it or in which order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags. Distinct tags on the same key yield independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Tag {
    Params = 1,
    EnvReset = 2,
    PolicyNoise = 3,
    EsNoise = 4,
    Bag = 5,
    Prop1 = 6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub group: u64,
    pub index: u64,
    pub sub: u64,
}

impl StreamKey {
    pub fn new(seed: u64, group: u64, index: u64, sub: u64) -> Self {
        Self { seed, group, index, sub }
    }

    pub fn rng(&self, tag: Tag) -> StreamRng {
        let mut key = [0u8; 32];
        for (k, word) in [self.seed, self.group, self.index, self.sub].iter().enumerate() {
            key[k * 8..(k + 1) * 8].copy_from_slice(&word.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(tag as u64);
        rng
    }

    /// A single 64-bit seed drawn from the tagged stream.
    pub fn seed_u64(&self, tag: Tag) -> u64 {
        self.rng(tag).next_u64()
    }
}
