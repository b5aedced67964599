//! Seedable, splittable randomness.
//!
//! Every stochastic routine takes an explicit generator. Independent streams
//! are carved out of one experiment seed with ChaCha's stream counter, so a
//! trial's randomness depends only on `(seed, stream)` and not on the order in
//! which trials run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent child stream `stream` of `seed`.
pub fn split(seed: u64, stream: u64) -> SimRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Derives a fresh seed from a generator, for handing to a sub-experiment.
pub fn child_seed(rng: &mut impl Rng) -> u64 {
    rng.gen()
}
