//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha8 keyed by a 64-bit seed
//! with an explicit stream id, so replicate `r` of a study always reads the
//! same numbers regardless of scheduling or platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier recorded in every output manifest.
pub const RNG_ALGORITHM: &str = "chacha8/rand_chacha-0.9/seed_from_u64+stream";

pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream ids used by different consumers of the same (seed, replicate).
pub mod streams {
    pub const DESIGN: u64 = 0;
    pub const NOISE: u64 = 1;
    pub const MONTE_CARLO: u64 = 2;
    pub const RESTART: u64 = 3;
    pub const PROBE: u64 = 4;

    /// Stream id for `kind` within replicate `replicate`.
    pub fn of(replicate: u64, kind: u64) -> u64 {
        replicate * 16 + kind
    }
}
