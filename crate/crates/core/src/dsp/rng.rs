//! Seeded random streams.
//!
//! Every consumer draws from its own ChaCha8 stream keyed by a 64-bit seed
//! and a stream id, so channels can be generated independently (and in any
//! order) while the output stays a pure function of the seed.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal, Uniform};

/// Stream-id namespaces; the low 32 bits carry the channel index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamKind {
    LowWhite = 1,
    HighWhite = 2,
    LowPink = 3,
    HighPink = 4,
    Artifact = 5,
    Weights = 6,
    Scenario = 7,
}

pub fn substream(seed: u64, kind: StreamKind, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((kind as u64) << 32) | (index & 0xffff_ffff));
    rng
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniform draw from `[lo, hi)`; returns `lo` when the range is empty.
pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    match Uniform::new(lo, hi) {
        Ok(dist) => dist.sample(rng),
        Err(_) => lo,
    }
}
