//! Seeded random streams.
//!
//! A [`SeedStream`] is a 64-bit key. Work is split into fixed-size chunks and
//! chunk `c` draws from ChaCha8 stream `c` of that key, so results do not
//! depend on how chunks are scheduled across threads. Independent keys for
//! named sub-tasks come from [`SeedStream::derive`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SeedStream {
    pub seed: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream { seed }
    }

    /// Key for a labelled sub-task. Depends only on the parent key and label.
    pub fn derive(&self, label: &str) -> SeedStream {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(label.as_bytes());
        let digest = h.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        SeedStream {
            seed: u64::from_le_bytes(bytes),
        }
    }

    pub fn chunk_rng(&self, chunk: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(chunk);
        rng
    }

    pub fn rng(&self) -> ChaCha8Rng {
        self.chunk_rng(0)
    }
}
