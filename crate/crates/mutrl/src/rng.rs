//! Seeded random-number streams.
//!
//! Every stochastic component draws from a ChaCha8 stream derived from an
//! explicit `u64` seed, so equal seeds reproduce equal behaviour bit for bit
//! on every platform. Independent concerns (weight init, exploration, replay
//! sampling, environment configs) get independent streams derived from the
//! same seed with distinct labels.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// A deterministic stream seeded directly from `seed`.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A deterministic stream derived from `(seed, label)`.
///
/// Streams with different labels are statistically independent, so one
/// component consuming more draws never perturbs another.
pub fn substream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest(seed, label));
    ChaCha8Rng::from_seed(key)
}

/// A derived `u64` seed for components that take seeds rather than streams.
pub fn subseed(seed: u64, label: &str) -> u64 {
    u64::from_le_bytes(digest(seed, label)[..8].try_into().unwrap())
}

fn digest(seed: u64, label: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.finalize().into()
}
