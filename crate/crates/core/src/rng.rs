//! Seedable, splittable random streams.
//!
//! A [`RandomStream`] is a ChaCha20 keystream. Child streams are keyed by a
//! SHA-256 digest of the parent key and a caller-supplied label, so a child
//! depends only on its parent and its label, never on how many other children
//! were drawn.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct RandomStream {
    key: [u8; 32],
    rng: ChaCha20Rng,
}

impl RandomStream {
    pub fn from_seed(seed: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"incseq/master");
        hasher.update(seed.to_le_bytes());
        Self::from_key(hasher.finalize().into())
    }

    fn from_key(key: [u8; 32]) -> Self {
        Self {
            key,
            rng: ChaCha20Rng::from_seed(key),
        }
    }

    /// Independent child stream for worker `index`.
    pub fn split(&self, index: u64) -> Self {
        self.derive(&index.to_le_bytes())
    }

    /// Independent child stream keyed by an arbitrary label.
    pub fn derive(&self, label: &[u8]) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(self.key);
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label);
        Self::from_key(hasher.finalize().into())
    }

    /// Uniform integer in `0..bound`.
    pub fn below(&mut self, bound: usize) -> usize {
        self.rng.random_range(0..bound)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
