//! Counter-based random streams.
//!
//! Every random consumer in the crate draws from a stream keyed by the
//! experiment seed and a path of counters (replicate index, role, bootstrap
//! index, ...). Streams never depend on scheduling order, so parallel and
//! sequential runs produce identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Role tags for per-replicate streams.
pub const ROLE_GP: u64 = 1;
pub const ROLE_ERROR: u64 = 2;
pub const ROLE_BOOTSTRAP: u64 = 3;
pub const ROLE_REFERENCE: u64 = 4;

/// The generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a counter path into a single 64-bit key.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Returns the generator for `(seed, path...)`.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}
