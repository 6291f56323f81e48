//! Deterministic counter-based random streams.
//!
//! Every randomized routine takes a `seed` and derives independent ChaCha
//! streams keyed by (seed, domain tag, counter). Results are therefore
//! independent of thread schedule: a trial's stream depends only on its
//! index, never on which worker runs it.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over a byte slice; used to mix domain tags into stream ids
/// and to fingerprint configs in output manifests.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// RNG for stream `(domain, counter)` under `seed`.
///
/// The domain tag separates unrelated uses of the same seed (point draws,
/// trial coefficients, member generation, ...) so adding a consumer never
/// shifts another one's stream.
pub fn stream(seed: u64, domain: &str, counter: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(domain.as_bytes()));
    rng.set_stream(counter);
    rng
}
