//! Seeded, splittable random streams.
//!
//! A stream is a `(seed, stream_id)` pair backed by ChaCha20, whose 64-bit
//! stream parameter gives independent substreams for the same key. Normal
//! variates are produced by inverse-CDF transformation of open-interval
//! uniforms, the same transform used on quasi-random points.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::special::normal_quantile;

/// Identifies a reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Derives a child stream by stable enumeration. Children of distinct
    /// parents or with distinct indices get distinct stream ids with
    /// overwhelming probability.
    pub fn child(&self, index: u64) -> Self {
        let id = splitmix64(splitmix64(self.stream_id ^ 0x5851_f42d_4c95_7f2d) ^ index);
        Self { seed: self.seed, stream_id: id }
    }

    pub fn generator(&self) -> NoiseRng {
        let mut inner = ChaCha20Rng::seed_from_u64(self.seed);
        inner.set_stream(self.stream_id);
        NoiseRng { inner }
    }
}

/// A live generator for one [`RngStream`].
pub struct NoiseRng {
    inner: ChaCha20Rng,
}

impl NoiseRng {
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on the open interval (0, 1) with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        normal_quantile(self.uniform())
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.standard_normal();
        }
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        // Lemire's multiply-shift with rejection.
        loop {
            let x = self.inner.next_u64();
            let m = (x as u128) * (n as u128);
            let low = m as u64;
            if low >= n || low >= n.wrapping_neg() % n {
                return (m >> 64) as u64;
            }
        }
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
