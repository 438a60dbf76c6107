//! Seeded randomness.
//!
//! Every random decision in the crate draws from [`ChaCha8Rng`], whose output
//! bitstream is fixed across platforms and releases of `rand_chacha`. Independent
//! consumers of one user seed (parallel environments, restarts, evaluation
//! samples) get separate ChaCha streams instead of ad-hoc seed arithmetic.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `stream` of the generator keyed by `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Two-level stream selection, e.g. (instance, sample).
pub fn substream(seed: u64, major: u64, minor: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ major.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(minor);
    rng
}
