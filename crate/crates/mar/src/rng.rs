//! Seeded randomness helpers.
//!
//! Every stochastic component in the crate draws from a ChaCha generator
//! keyed by a user-visible seed plus a fixed stream id, so independent
//! components never share a stream and whole pipelines replay bit-exactly.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Stream ids, one per stochastic component.
pub(crate) mod stream {
    pub const FOLDS: u64 = 1;
    pub const TRIPLES: u64 = 2;
    pub const COLLECTION: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const PAIR_SAMPLING: u64 = 5;
    pub const PARAM_INIT: u64 = 6;
    pub const SYNTH_BATCHES: u64 = 7;
    pub const TARGET_BATCHES: u64 = 8;
    pub const PERMUTATION: u64 = 9;
}

/// A ChaCha generator for `seed`, isolated on `stream`.
pub(crate) fn seeded(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a child seed, used when one seed fans out into per-trial or
/// per-document generators (splitmix64 finalizer).
pub(crate) fn derive(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sample `amount` distinct indices from `0..len` uniformly without
/// replacement (partial Fisher-Yates); order of the result is the order
/// in which indices were drawn.
pub(crate) fn sample_indices(rng: &mut impl Rng, len: usize, amount: usize) -> Vec<usize> {
    let amount = amount.min(len);
    let mut pool: Vec<usize> = (0..len).collect();
    for i in 0..amount {
        let j = rng.random_range(i..len);
        pool.swap(i, j);
    }
    pool.truncate(amount);
    pool
}
