//! Named random substreams.
//!
//! Every source of randomness in a run draws from its own ChaCha stream,
//! keyed by the run seed and a fixed stream number, so enabling one feature
//! (say, V2V packet loss) never shifts the draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substream {
    Demand = 1,
    Kind = 2,
    Comms = 3,
    Exploration = 4,
    NetInit = 5,
    Events = 6,
    Replay = 7,
}

pub fn substream(seed: u64, which: Substream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// Seed for repeat `k` of a run with base seed `seed`.
pub fn derived_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(k)
}
