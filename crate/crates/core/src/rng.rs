//! Deterministic random streams.
//!
//! All randomness flows from one 64-bit seed; independent substreams are
//! derived per label (e.g. a manifest entry id) via the ChaCha stream
//! counter, so batch entries stay reproducible regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stable 64-bit FNV-1a, used to map labels to stream ids.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// RNG for the substream of `label` under the command seed.
pub fn substream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label.as_bytes()));
    rng
}

/// Indexed variant for positional substreams (episode number, sigma index).
pub fn substream_indexed(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label.as_bytes()) ^ index.wrapping_mul(0x9e3779b97f4a7c15));
    rng
}
