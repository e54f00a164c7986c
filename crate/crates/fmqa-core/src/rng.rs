//! Deterministic RNG derivation.
//!
//! Every random decision in the crate draws from a ChaCha8 stream keyed by
//! (user seed, purpose tag, index). Distinct purposes and indices get
//! independent streams, so results never depend on the order in which
//! streams are consumed (or on how work is scheduled across threads).

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const PURPOSE_TRAIN_INIT: u64 = 1;
pub(crate) const PURPOSE_TRAIN_SHUFFLE: u64 = 2;
pub(crate) const PURPOSE_SA_SHOT: u64 = 3;
pub(crate) const PURPOSE_INGEST_SAMPLE: u64 = 4;
pub(crate) const PURPOSE_SPLIT: u64 = 5;
pub(crate) const PURPOSE_USER_SAMPLE: u64 = 6;
pub(crate) const PURPOSE_SYNTH: u64 = 7;

pub(crate) fn seeded_rng(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&purpose.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
