//! Per-sample random stream.
//!
//! Generator: xoshiro256** (Blackman & Vigna), state expanded from a 64-bit
//! seed with SplitMix64. The draw primitives below are defined here rather
//! than borrowed from `rand` so the mapping from raw words to indices and
//! reals cannot drift with a dependency upgrade:
//!
//! * `index(n)`: Lemire's multiply-shift with rejection on the 64-bit word.
//! * `unit()`: top 53 bits of one word scaled by 2^-53, giving `[0, 1)`.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

#[derive(Debug, Clone)]
pub struct SeedStream {
    inner: Xoshiro256StarStar,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream {
            inner: Xoshiro256StarStar::seed_from_u64(seed),
        }
    }

    /// Stream derived from a base seed and a purpose tag, for shuffles that
    /// must not share state with melody generation.
    pub fn derived(seed: u64, tag: u64) -> Self {
        let mixed = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
        Self::new(mixed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..n`. Panics on `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index() over an empty range");
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform real in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn coin(&mut self) -> bool {
        self.index(2) == 1
    }

    /// Fisher-Yates, walking from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}
