//! Seed derivation. Every random stream in the crate starts from a 64-bit seed
//! expanded by ChaCha8, so draws are reproducible across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The SplitMix64 finalizer; a bijection on `u64`.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `replication` at horizon index `horizon_index`.
///
/// For a fixed master seed the map is injective as long as
/// `horizon_index < 2^24` and `replication < 2^40`.
pub fn replication_seed(master: u64, horizon_index: usize, replication: usize) -> u64 {
    debug_assert!((horizon_index as u64) < (1 << 24));
    debug_assert!((replication as u64) < (1 << 40));
    let key = ((horizon_index as u64) << 40) | replication as u64;
    splitmix64(master ^ splitmix64(key))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
