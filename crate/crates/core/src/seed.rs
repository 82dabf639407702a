//! Seed plumbing. Every random stream in the crate is a `ChaCha8Rng` seeded
//! from a `u64`; sub-streams are derived by hashing a parent seed together
//! with a purpose label so that adding a new consumer never shifts the
//! streams of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Stable child seed for `(seed, label)`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Child seed for the `index`-th item of a labelled family.
pub fn derive_indexed(seed: u64, label: &str, index: u64) -> u64 {
    derive_seed(seed, &format!("{label}#{index}"))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hex SHA-256 of an arbitrary string; used for config hashes in metadata.
pub fn hash_str(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
