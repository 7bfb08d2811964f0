//! Named deterministic randomness streams.
//!
//! Every run takes one global seed; each consumer (data sampling, weight
//! init, exploration noise, …) derives its own stream by name so that
//! varying one component never reshuffles another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives an independent RNG from `(seed, stream name, index)` using an
/// FNV-1a mix of the name bytes.
pub fn stream_rng(seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in name.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^= index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    h = h.wrapping_mul(0x0000_0100_0000_01b3);
    ChaCha8Rng::seed_from_u64(seed ^ h)
}
