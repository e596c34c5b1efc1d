//! Seeded, counter-based random streams.
//!
//! A single root seed is expanded into independent ChaCha8 streams, one per
//! task (usually one per simulated path). Stream `k` of root seed `s` is the
//! same sequence no matter how many other streams were drawn before it, so
//! any subset of paths can be regenerated on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Identifies one random stream: the root seed and the stream index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub root_seed: u64,
    pub stream: u64,
}

impl StreamId {
    pub fn new(root_seed: u64, stream: u64) -> Self {
        Self { root_seed, stream }
    }

    /// Materialise the generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root_seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Stream factory for a batch of tasks sharing one root seed.
///
/// Streams are numbered from `offset`, so two experiments run from the same
/// root seed can be kept disjoint by giving them different offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStreams {
    root_seed: u64,
    offset: u64,
}

impl SeedStreams {
    pub fn new(root_seed: u64) -> Self {
        Self { root_seed, offset: 0 }
    }

    pub fn with_offset(root_seed: u64, offset: u64) -> Self {
        Self { root_seed, offset }
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn stream(&self, task: u64) -> StreamId {
        StreamId::new(self.root_seed, self.offset.wrapping_add(task))
    }
}
