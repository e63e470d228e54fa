//! Seeded, portable random numbers.
//!
//! Every random quantity comes from ChaCha8 (`rand_chacha`), keyed by
//! `seed_from_u64(seed)` and separated into independent streams so that, for
//! one seed, the test signal, random sample points and ring rotations do not
//! share draws. A uniform double is `(next_u64 >> 11) · 2⁻⁵³`, which any
//! ChaCha8 implementation reproduces exactly.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream used for test-signal coefficients.
pub const SIGNAL_STREAM: u64 = 0;
/// Stream used for uniformly random sample points.
pub const RANDOM_POINTS_STREAM: u64 = 1;
/// Stream used for per-ring longitude rotations.
pub const RING_ROTATION_STREAM: u64 = 2;

pub struct PortableRng {
    inner: ChaCha8Rng,
}

impl PortableRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn next_unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[-1, 1)`.
    pub fn next_symmetric(&mut self) -> f64 {
        2.0 * self.next_unit() - 1.0
    }
}
