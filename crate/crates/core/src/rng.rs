//! Seed derivation for reproducible parallel work.
//!
//! Every independent unit of work (a permutation replicate, a simulation
//! iteration, a bootstrap) gets its own generator seeded from the run seed and
//! a stream index, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer applied to `base` combined with `stream`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn derived_rng(base: u64, stream: u64) -> Rng {
    rng_from(derive_seed(base, stream))
}
