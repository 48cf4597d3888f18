//! Per-item seed derivation.
//!
//! Every random decision is keyed by `(root seed, item key)` so results do
//! not depend on iteration order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a child seed from a root seed and a textual key.
pub fn derive_seed(root: u64, key: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update((key.len() as u64).to_le_bytes());
    hasher.update(key.as_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(root: u64, key: &str) -> ChaCha8Rng {
    rng_from_seed(derive_seed(root, key))
}
