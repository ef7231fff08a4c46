//! Seeded generator streams.
//!
//! Every consumer of randomness gets its own ChaCha stream, so the arrival
//! process of a replication is unaffected by how many draws a policy makes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const ARRIVAL_STREAM: u64 = 0;
pub const POLICY_STREAM: u64 = 1;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
