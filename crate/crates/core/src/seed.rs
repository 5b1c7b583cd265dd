//! Stable seed derivation for independently reproducible stages.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Hashes `(global_seed, stage, language, index)` into a 64-bit seed.
///
/// The value depends only on its inputs, never on scheduling or on how many
/// other streams were drawn before, so stages can run in any order.
pub fn derive_seed(global_seed: u64, stage: &str, language: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(global_seed.to_le_bytes());
    h.update((stage.len() as u64).to_le_bytes());
    h.update(stage.as_bytes());
    h.update((language.len() as u64).to_le_bytes());
    h.update(language.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stream(global_seed: u64, stage: &str, language: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(global_seed, stage, language, index))
}
