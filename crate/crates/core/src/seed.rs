//! Deterministic seeding.
//!
//! Every random draw in the pipeline comes from a ChaCha stream keyed by a
//! root seed plus a tag path, so any sub-computation can be replayed in
//! isolation (one training step, one FID run, one generation task).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SeededRng = ChaCha8Rng;

/// Derive a child seed from `seed` and a path of tags.
pub fn derive_seed(seed: u64, tags: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for tag in tags {
        hasher.update((tag.len() as u64).to_le_bytes());
        hasher.update(tag.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(seed: u64, tags: &[&str]) -> SeededRng {
    rng(derive_seed(seed, tags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_stable_and_tag_sensitive() {
        assert_eq!(derive_seed(7, &["a", "b"]), derive_seed(7, &["a", "b"]));
        assert_ne!(derive_seed(7, &["a", "b"]), derive_seed(7, &["ab"]));
        assert_ne!(derive_seed(7, &["a"]), derive_seed(8, &["a"]));
        let x: u64 = derived_rng(1, &["x"]).random();
        let y: u64 = derived_rng(1, &["x"]).random();
        assert_eq!(x, y);
    }
}
