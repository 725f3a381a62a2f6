//! Seeded random streams.
//!
//! All randomness comes from ChaCha8 keyed by a 64-bit seed. Independent
//! draws (one synthetic point, one decimation subset) use distinct stream
//! ids of the same key, so any of them can be recomputed on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for `stream` under `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id for repeat `repeat` at decimation scale `scale`.
pub fn decimation_stream(scale: usize, repeat: usize) -> u64 {
    ((scale as u64) << 32) | (repeat as u64 & 0xffff_ffff)
}
