//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by the
//! run seed and selected by a 64-bit stream id. ChaCha is counter based, so
//! distinct streams never overlap and adding a consumer on a new stream leaves
//! all existing draws unchanged.
//!
//! Stream layout:
//!
//! | stream id                      | consumer                              |
//! |--------------------------------|---------------------------------------|
//! | `0`                            | critical delay of the irregular arm   |
//! | `1 + i`                        | offset of arm `i`                     |
//! | `GENERATOR_STREAM_BASE + i`    | instance generator, arm `i`           |
//! | `ENV_STREAM`                   | payoff noise of a stochastic env      |
//! | `SWEEP_STREAM_BASE + trial`    | verification sweeps                   |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const IRREGULAR_STREAM: u64 = 0;
pub const OFFSET_STREAM_BASE: u64 = 1;
pub const GENERATOR_STREAM_BASE: u64 = 1 << 32;
pub const ENV_STREAM: u64 = 1 << 40;
pub const SWEEP_STREAM_BASE: u64 = 1 << 48;

pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

pub fn offset_stream(seed: u64, arm: usize) -> ChaCha8Rng {
    stream(seed, OFFSET_STREAM_BASE + arm as u64)
}
