//! Seeded random streams.
//!
//! Every consumer of randomness in a mission gets its own ChaCha stream
//! derived from the run seed, so replays are bit-identical and concurrent
//! runs never share generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids below this are reserved for per-measurement sensor noise.
pub const MEASUREMENT_STREAMS: u64 = 1 << 32;
pub const PLANNER_STREAM: u64 = MEASUREMENT_STREAMS;
pub const CANDIDATE_STREAM: u64 = MEASUREMENT_STREAMS + 1;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn measurement_rng(seed: u64, index: usize) -> ChaCha8Rng {
    stream_rng(seed, index as u64 % MEASUREMENT_STREAMS)
}
