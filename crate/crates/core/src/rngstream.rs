//! Seed discipline: every consumer of randomness gets its own ChaCha
//! stream derived from the run seed, so no two purposes ever share draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids, fixed for the life of the artifact format.
pub const STREAM_INIT: u64 = 0;
pub const STREAM_ENV: u64 = 1;
pub const STREAM_ACTION: u64 = 2;
pub const STREAM_BATCH: u64 = 3;
pub const STREAM_SUBSET: u64 = 4;
pub const STREAM_UPDATE: u64 = 5;
pub const STREAM_EVAL: u64 = 6;

/// A deterministic rng for `(seed, stream)`. Streams with the same seed
/// but different ids never overlap.
pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
