//! Named random sub-streams derived from a single root seed.
//!
//! Every consumer of randomness asks for a stream by name. The derived seed is
//! the first eight bytes (little endian) of `SHA-256(root_le_bytes || name)`,
//! so adding a new consumer never perturbs the draws seen by existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Deterministic RNG type used throughout the crate.
pub type Rng = ChaCha8Rng;

/// A root seed from which named sub-seeds are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedTree {
    root: u64,
}

impl SeedTree {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// Seed for the sub-stream called `name`.
    pub fn seed(&self, name: &str) -> u64 {
        derive_seed(self.root, name)
    }

    /// A child tree rooted at the sub-stream called `name`.
    pub fn child(&self, name: &str) -> SeedTree {
        SeedTree::new(self.seed(name))
    }

    /// A child tree for the `index`-th member of a family (`name/index`).
    pub fn indexed(&self, name: &str, index: u64) -> SeedTree {
        SeedTree::new(self.seed(&format!("{name}/{index}")))
    }

    /// RNG for the sub-stream called `name`.
    pub fn rng(&self, name: &str) -> Rng {
        Rng::seed_from_u64(self.seed(name))
    }
}

pub fn derive_seed(root: u64, name: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
