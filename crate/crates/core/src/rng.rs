//! Seeded random streams.
//!
//! Every stochastic step takes an explicit generator. `ChaCha20Rng` output is
//! specified independently of platform and word size, so an identical seed and
//! stream id reproduce the same noise matrix everywhere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::scalar::Real;

pub type SeededRng = ChaCha20Rng;

/// Generator for `seed` on an independent sub-stream.
pub fn stream(seed: u64, stream_id: u64) -> SeededRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha20Rng::seed_from_u64(seed)
}

#[inline]
pub fn standard_normal<F: Real, R: Rng + ?Sized>(rng: &mut R) -> F {
    F::of(rng.sample::<f64, _>(StandardNormal))
}

/// Laplace(0, scale) by inversion of a uniform draw on (-1/2, 1/2).
#[inline]
pub fn laplace<F: Real, R: Rng + ?Sized>(rng: &mut R, scale: F) -> F {
    let mut u: f64 = rng.random::<f64>() - 0.5;
    while u == -0.5 {
        u = rng.random::<f64>() - 0.5;
    }
    let v = -u.signum() * (1.0 - 2.0 * u.abs()).ln();
    scale * F::of(v)
}
