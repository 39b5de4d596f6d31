//! Seed discipline.
//!
//! A run has one master seed. Every consumer (a player, the public string
//! generator, the partition shuffle, the server-side optimizer) gets its own
//! ChaCha stream addressed by a `(tag, index)` pair, so a player's randomness
//! does not depend on how many other players were simulated before it or on
//! which thread simulated it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Values are part of the reproducibility contract; do not renumber.
pub mod tag {
    pub const PLAYER: u64 = 1;
    pub const PUBLIC: u64 = 2;
    pub const PARTITION: u64 = 3;
    pub const SERVER: u64 = 4;
    pub const DATASET: u64 = 5;
    pub const TRIAL: u64 = 6;
    pub const PILOT: u64 = 7;
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a sequence of labels.
pub fn derive_seed(parent: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(mix64(parent), |acc, &l| {
        mix64(acc ^ mix64(l.wrapping_add(0x632B_E59B_D9B4_E019)))
    })
}

/// Counter-addressed family of random streams under one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    master: u64,
}

impl SeedStream {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    fn key(&self, tag: u64) -> [u8; 32] {
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
            let word = derive_seed(self.master, &[tag, i as u64]);
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        key
    }

    /// Independent stream for `(tag, index)`.
    pub fn rng(&self, tag: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key(tag));
        rng.set_stream(index);
        rng
    }

    /// Factory that caches the key for one tag; cheaper when addressing many players.
    pub fn streams(&self, tag: u64) -> TaggedStreams {
        TaggedStreams { key: self.key(tag) }
    }

    /// A child family, e.g. one per trial.
    pub fn child(&self, labels: &[u64]) -> SeedStream {
        SeedStream::new(derive_seed(self.master, labels))
    }
}

#[derive(Debug, Clone)]
pub struct TaggedStreams {
    key: [u8; 32],
}

impl TaggedStreams {
    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }
}
