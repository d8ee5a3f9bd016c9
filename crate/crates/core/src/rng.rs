//! Seeded randomness.
//!
//! All sampling in the toolkit draws from [`ChaCha8Rng`], a counter-based
//! generator whose output stream is fixed across platforms and releases of
//! `rand_chacha`. Sub-streams are derived with [`derive_seed`] so that
//! independent consumers (sampling, FPS, initialization, shuffling) never
//! share a stream.

pub use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

/// Creates the generator for `seed`.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with a stream tag (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
