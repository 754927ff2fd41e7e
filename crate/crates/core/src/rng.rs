//! Deterministic stream derivation.
//!
//! Every randomized stage derives its generator from the master seed plus a
//! purpose tag and the relevant indices (restart, EM iteration, observation).
//! Results are therefore bit-reproducible no matter how work is scheduled
//! across threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags separating the random streams of different pipeline stages.
pub mod purpose {
    pub const INIT: u64 = 1;
    pub const ESTEP: u64 = 2;
    pub const RANK: u64 = 3;
    pub const DECODE: u64 = 4;
    pub const FM: u64 = 5;
    pub const SIM_GRAPH: u64 = 6;
    pub const SIM_ROUTE: u64 = 7;
    pub const SIM_SHUFFLE: u64 = 8;
    pub const SIM_PATHS: u64 = 9;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes the master seed with a list of tags into a single 64-bit key.
pub fn derive_key(master_seed: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(master_seed);
    for &t in tags {
        state = splitmix64(state ^ splitmix64(t.wrapping_add(0xa076_1d64_78bd_642f)));
    }
    state
}

/// A seedable generator for the stream identified by `(master_seed, tags)`.
pub fn derive_rng(master_seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_key(master_seed, tags))
}
