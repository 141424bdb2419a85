//! Seeded random streams.
//!
//! Every random quantity in the crate comes from ChaCha8 (`rand_chacha`),
//! a counter-based generator whose output is identical across platforms.
//! A master seed selects the key; independent tasks (imputation draw `k`,
//! replication `r` at grid point `i`, ...) select disjoint 64-bit stream
//! ids of that key, so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` under master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream reserved for drawing simulated samples. Imputation draw `k` uses
/// stream `k` and replications use [`replication_stream`], neither of which
/// reaches this id in practice.
pub const SAMPLING_STREAM: u64 = 1 << 63;

/// Stream id for replication `rep` at grid index `grid`.
pub fn replication_stream(grid: usize, rep: usize) -> u64 {
    ((grid as u64) << 32) | rep as u64
}
