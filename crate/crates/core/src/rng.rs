//! Seeded random streams.
//!
//! Every realization of a random ensemble gets its own ChaCha8 stream whose
//! 256-bit seed is `SHA-256(tag || seed || realization)`. Streams are derived
//! statelessly, so realizations can be generated in any order or in parallel
//! and still reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const STREAM_TAG: &[u8] = b"intermittency-lab/stream/v1";

/// Stream for realization `realization` of the ensemble seeded by `seed`.
pub fn substream(seed: u64, realization: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(STREAM_TAG);
    hasher.update(seed.to_le_bytes());
    hasher.update(realization.to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Uniform sample on `[lo, hi)`.
pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    use rand::RngExt;
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

/// Standard normal sample (Box-Muller, one branch).
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    use rand::RngExt;
    loop {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        if u > 0.0 {
            return (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos();
        }
    }
}
