//! Seed derivation for independent, reproducible random streams.
//!
//! Every consumer (graph sampler, partition shuffle, initial point, each
//! agent's estimator) gets its own ChaCha stream whose seed is a hash of the
//! base seed, a stream tag and an index. Streams never depend on thread
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Named stream tags, so that unrelated consumers never share a seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Graph = 1,
    Partition = 2,
    InitialPoint = 3,
    Agent = 4,
    Dataset = 5,
    TestSet = 6,
    Centers = 7,
    Resample = 8,
    Instance = 9,
    Oracle = 10,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a sub-seed from `(base, stream, index)`.
pub fn derive_seed(base: u64, stream: Stream, index: u64) -> u64 {
    let a = splitmix64(base ^ (stream as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(a ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

pub fn rng_for(base: u64, stream: Stream, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(base, stream, index))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
