//! Seed derivation for independent, reproducible random streams.
//!
//! Every parallel job (tree, repetition, permutation) gets its own stream
//! derived from a master seed and the job's index, so results never depend
//! on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream domains keep seeds derived for different purposes apart even when
/// they share a master seed and index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Tree = 1,
    Data = 2,
    Forest = 3,
    Permutation = 4,
    Repetition = 5,
    Columns = 6,
    Source = 7,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, domain: Domain, index: u64) -> u64 {
    master ^ mix64(mix64(domain as u64) ^ index)
}

pub fn stream(master: u64, domain: Domain, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, domain, index))
}
