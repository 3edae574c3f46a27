//! Hash-split random streams.
//!
//! Every consumer of randomness derives its own stream from a master seed and
//! a string key, so the order in which goals or seeds are processed cannot
//! change any result.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Deterministic random stream identified by `(master_seed, key)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    key: String,
    rng: ChaCha20Rng,
}

/// Derives the stream for `key` under `master_seed`.
///
/// The ChaCha20 seed is `SHA-256(le_bytes(master_seed) || 0x00 || key)`, which
/// is identical on every platform.
pub fn derive_stream(master_seed: u64, key: &str) -> RngStream {
    assert!(!key.is_empty(), "stream key must be non-empty");
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update([0u8]);
    hasher.update(key.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    RngStream {
        master_seed,
        key: key.to_owned(),
        rng: ChaCha20Rng::from_seed(seed),
    }
}

/// Maps `(master_seed, key)` to a 64-bit seed, used for per-run master seeds.
pub fn derive_seed(master_seed: u64, key: &str) -> u64 {
    derive_stream(master_seed, key).next_u64()
}

impl RngStream {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    /// Child stream keyed `"{key}/{suffix}"`; independent of this stream's position.
    pub fn fork(&self, suffix: &str) -> RngStream {
        derive_stream(self.master_seed, &format!("{}/{}", self.key, suffix))
    }
}

impl RngCore for RngStream {
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

#[cfg(test)]
mod tests {
    use super::*;

    fn draws(s: &mut RngStream) -> Vec<u64> {
        (0..16).map(|_| s.next_u64()).collect()
    }

    #[test]
    fn same_key_same_stream() {
        assert_eq!(
            draws(&mut derive_stream(42, "train/g0")),
            draws(&mut derive_stream(42, "train/g0"))
        );
    }

    #[test]
    fn distinct_keys_differ() {
        let a = derive_stream(42, "train/g0").next_u64();
        let b = derive_stream(42, "train/g1").next_u64();
        assert_ne!(a, b);
    }

    #[test]
    fn distinct_seeds_differ() {
        assert_ne!(
            draws(&mut derive_stream(42, "x")),
            draws(&mut derive_stream(43, "x"))
        );
    }

    #[test]
    fn fork_ignores_parent_position() {
        let mut parent = derive_stream(1, "root");
        let before = parent.fork("child").next_u64();
        parent.next_u64();
        assert_eq!(before, parent.fork("child").next_u64());
        assert_eq!(before, derive_stream(1, "root/child").next_u64());
    }

    #[test]
    fn known_first_draw_is_stable() {
        // Keystream word 0 of ChaCha20 keyed with SHA-256(0u64 LE || 0x00 || "k"),
        // computed with an independent ChaCha20 implementation.
        assert_eq!(derive_stream(0, "k").next_u64(), 15485474613194683752);
    }
}
