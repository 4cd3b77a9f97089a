//! Seeded random sources.
//!
//! Every random decision in a run draws from a [`ChaCha8Rng`] derived from
//! the run seed and a named stream, so the initial design is shared across
//! methods at the same seed and no component depends on global state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent streams derived from one run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    InitialDesign = 1,
    Hypers = 2,
    Acquisition = 3,
    Benchmark = 4,
    Evaluation = 5,
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Deterministic sub-seed for the `index`-th child of `seed` (splitmix64).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
