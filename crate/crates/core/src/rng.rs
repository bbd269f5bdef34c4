//! Seeding conventions.
//!
//! Every random stream is a ChaCha8 generator keyed by a 64-bit seed and a
//! 64-bit stream id. Replication `r` of an experiment with master seed `s`
//! uses `stream_rng(s, r)`. Work that fans out over many independent units
//! (bootstrap samples, resamples) first draws one `u64` base seed from its
//! parent generator and then gives unit `i` the generator
//! `stream_rng(base, i)`, so the result does not depend on how the units are
//! scheduled across threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type GbRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> GbRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Base seed for a fan-out of independent units; see the module docs.
pub fn fork_seed(rng: &mut GbRng) -> u64 {
    rng.next_u64()
}

pub fn fill_standard_normal(rng: &mut GbRng, out: &mut [f64]) {
    for v in out {
        *v = rng.sample(StandardNormal);
    }
}
