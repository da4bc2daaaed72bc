//! Seeded RNG plumbing.
//!
//! All stochastic operations take explicit integer seeds; concurrent work
//! derives disjoint streams with `derive_seed` so results do not depend on
//! scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type Rng = ChaCha12Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// splitmix64 mix of a base seed and a stream index.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
