//! Seeded RNG construction and seed derivation.
//!
//! All stochastic choices (initialization, epoch shuffles, sampling in
//! witnesses and detectors) flow through ChaCha12 streams derived from a
//! single base seed, so a run is reproducible from `(config, seed)` alone.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// splitmix64 mixing step; decorrelates nearby seeds.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent stream seed from a base seed and a salt
/// (epoch index, run index, purpose tag, ...).
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    mix(mix(base) ^ mix(salt.wrapping_add(0xA5A5_A5A5_A5A5_A5A5)))
}

/// Seeded generator for a given purpose.
pub fn rng_from_seed(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
