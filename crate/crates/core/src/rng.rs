//! Deterministic stream splitting: every unit of work gets its own ChaCha
//! stream derived from a master seed and a stream id, so results do not
//! depend on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Namespaced stream id; keeps different consumers of one seed apart.
pub fn stream_id(domain: u32, index: u64) -> u64 {
    (u64::from(domain) << 48) | (index & ((1u64 << 48) - 1))
}
