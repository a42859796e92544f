//! Versioned random stream used for every seeded draw in the crate.
//!
//! Algorithm id 1: ChaCha20 keyed by `rand_core`'s `seed_from_u64` expansion of a
//! 64-bit seed; a uniform `[0, 1)` double is `(next_u64 >> 11) · 2⁻⁵³`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub const PRNG_ID: u32 = 1;

pub struct SeededStream(ChaCha20Rng);

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha20Rng::seed_from_u64(seed))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[-s, s)`.
    #[inline]
    pub fn symmetric(&mut self, s: f64) -> f64 {
        s * (2.0 * self.uniform() - 1.0)
    }

    /// Fisher-Yates shuffle driven by this stream.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = (self.next_u64() % (i as u64 + 1)) as usize;
            items.swap(i, j);
        }
    }
}
