//! Counter-based SplitMix64 generator.
//!
//! The `i`-th output (0-based) for a seed `s` is
//! `mix(s + (i + 1) * 0x9E3779B97F4A7C15)` with the standard SplitMix64
//! finalizer, so any draw can be regenerated from `(seed, index)` alone.
//! Uniform doubles use the top 53 bits: `(x >> 11) * 2^-53`.
//!
//! Test vectors (seed 0): `0xE220A8397B1DCDAF`, `0x6E789E6AA1B965F4`,
//! `0x06C45D188009454F`.

use crate::scalar::Real;

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Output number `index` of the stream for `seed`, without any state.
pub fn splitmix_at(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Map a 64-bit word to a double in `[0, 1)`.
pub fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMix64 {
    seed: u64,
    counter: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    /// Number of words drawn so far.
    pub fn position(&self) -> u64 {
        self.counter
    }

    pub fn next_u64(&mut self) -> u64 {
        let x = splitmix_at(self.seed, self.counter);
        self.counter += 1;
        x
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform<T: Real>(&mut self, lo: T, hi: T) -> T {
        lo + (hi - lo) * T::lit(self.next_f64())
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        let span = (hi - lo + 1) as u64;
        lo + (self.next_u64() % span) as usize
    }
}

/// Draw an index from a categorical distribution given by its cumulative
/// sums (last entry ≈ 1) using one uniform variate `u ∈ [0, 1)`.
pub fn categorical_from_cdf<T: Real>(cdf: &[T], u: f64) -> usize {
    let total = cdf.last().map_or(1.0, |c| c.as_f64());
    let target = u * total;
    cdf.iter()
        .position(|&c| target < c.as_f64())
        .unwrap_or(cdf.len().saturating_sub(1))
}
