//! Stable derivation of per-component RNG seeds from the single run seed.
//!
//! Every consumer of randomness (init, per-epoch shuffling and augmentation,
//! per-domain clustering, data generation stages) gets its own stream derived
//! by hashing `(seed, component, index)`. Streams never depend on call order,
//! so resuming from a checkpoint replays the exact same randomness.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a child seed from the run seed, a component label, and an index
/// (usually the epoch). SHA-256 keeps the mapping stable across platforms
/// and releases, unlike the std hasher.
pub fn derive_seed(seed: u64, component: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0x1f]); // separator so ("ab", 1) != ("a", ...) collisions can't happen
    hasher.update(component.as_bytes());
    hasher.update([0x1f]);
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// A deterministic RNG for one component stream.
pub fn component_rng(seed: u64, component: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, component, index))
}
