//! Seeded RNG streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 generator keyed
//! by the master seed and a stream id, so independent consumers (dataset
//! generation, chains, prior draws, optimizer restarts) never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const STREAM_PERTURBATION: u64 = 2;
pub const STREAM_OUTPUT_NOISE: u64 = 3;
pub const STREAM_OPTIMIZER: u64 = 4;
pub const STREAM_PRIOR_DRAWS: u64 = 5;
/// Chain `c` uses stream `STREAM_CHAIN_BASE + c`.
pub const STREAM_CHAIN_BASE: u64 = 1 << 16;

pub fn stream(seed: u64, id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
