//! Seeded pseudo-random numbers with a fixed, portable algorithm.
//!
//! The generator is xoshiro256++ seeded from a single `u64` through
//! SplitMix64 (the reference seeding procedure). All derived draws are
//! defined here in terms of `next_u64` so that fold plans and weight
//! initialisations can be reproduced bit-for-bit in any language:
//!
//! * `uniform()`   = `(next_u64() >> 11) * 2^-53`, in `[0, 1)`
//! * `below(n)`    = `next_u64() % n`
//! * `shuffle(xs)` = Fisher–Yates from the last element down,
//!   swapping `xs[i]` with `xs[below(i + 1)]`

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: Xoshiro256PlusPlus,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform index in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        (self.next_u64() % n as u64) as usize
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Derives an independent stream seed from a master seed and a stream tag
/// (SplitMix64 finaliser over `master + golden * (tag + 1)`).
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(tag.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
