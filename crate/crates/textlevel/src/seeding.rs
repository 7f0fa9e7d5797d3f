//! Deterministic seed derivation.
//!
//! All randomness in the crate flows from a single base seed through
//! [`derive_seed`], so concurrent work (bootstrap resamples, rating runs,
//! batch labeling) is schedule-independent: the stream for a unit of work
//! depends only on the base seed and the unit's identity, never on execution
//! order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a child seed from `(base, context, index)`.
///
/// The context string names the consumer ("split", "bootstrap", a text id),
/// the index distinguishes repeated draws within it.
pub fn derive_seed(base: u64, context: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update((context.len() as u64).to_le_bytes());
    hasher.update(context.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// RNG seeded from [`derive_seed`]. ChaCha8 keeps streams identical across
/// platforms and crate versions.
pub fn derived_rng(base: u64, context: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, context, index))
}

/// RNG seeded directly from a caller-supplied seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
