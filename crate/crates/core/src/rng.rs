//! Counter-based pseudo-random numbers.
//!
//! SplitMix64 run in pure counter mode: the i-th output is a stateless mix of
//! `key + (i+1)·γ`, so any index can be generated without producing its
//! predecessors and independent streams are cheap to derive. This is what
//! makes Monte Carlo results independent of scheduling: replication r always
//! consumes stream (seed, r) no matter which thread runs it.
//!
//! Normal variates come from the inverse CDF, keeping every draw a pure
//! function of (seed, stream, counter).

use crate::normal::normal_quantile;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Splittable counter-based generator with a 64-bit seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    /// Root generator for a seed.
    pub fn new(seed: u64) -> Self {
        Self { key: mix64(seed ^ GOLDEN_GAMMA), counter: 0 }
    }

    /// Derive the generator for a named substream. Streams with different ids
    /// are decorrelated regardless of how many values each one consumes.
    pub fn stream(seed: u64, stream_id: u64) -> Self {
        let key = mix64(mix64(seed ^ GOLDEN_GAMMA) ^ stream_id.wrapping_mul(GOLDEN_GAMMA));
        Self { key, counter: 0 }
    }

    /// Substream of an existing stream (e.g. bootstrap draw b inside
    /// replication r).
    pub fn substream(&self, substream_id: u64) -> Self {
        let key = mix64(self.key ^ substream_id.wrapping_mul(GOLDEN_GAMMA).rotate_left(17));
        Self { key, counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform draw on the open interval (0, 1); never returns an endpoint,
    /// so the inverse normal CDF stays finite.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal draw via the inverse CDF.
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        // next_uniform is strictly inside (0,1), so the quantile cannot fail
        normal_quantile(self.next_uniform()).expect("uniform draw in (0,1)")
    }

    /// Uniform draw on [lo, hi).
    #[inline]
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_uniform()
    }

    /// Uniform integer in [0, n) by rejection-free scaling (n ≪ 2^53, which
    /// holds for every sample size we handle).
    #[inline]
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let u = self.next_uniform();
        let k = (u * n as f64) as usize;
        k.min(n - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_seed() {
        let mut a = CounterRng::new(42);
        let mut b = CounterRng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn seeds_differ() {
        let mut a = CounterRng::new(1);
        let mut b = CounterRng::new(2);
        let same = (0..64).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn streams_are_stateless_splits() {
        // Stream r is identical whether or not other streams were consumed.
        let mut s3 = CounterRng::stream(7, 3);
        let first: Vec<u64> = (0..10).map(|_| s3.next_u64()).collect();

        let mut s1 = CounterRng::stream(7, 1);
        s1.next_u64();
        let mut s3b = CounterRng::stream(7, 3);
        let second: Vec<u64> = (0..10).map(|_| s3b.next_u64()).collect();
        assert_eq!(first, second);
    }

    #[test]
    fn uniform_strictly_inside_unit_interval() {
        let mut r = CounterRng::new(9);
        for _ in 0..100_000 {
            let u = r.next_uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn normal_moments_sane() {
        let mut r = CounterRng::new(2024);
        let n = 200_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z = r.next_normal();
            s1 += z;
            s2 += z * z;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean = {mean}");
        assert!((var - 1.0).abs() < 0.02, "var = {var}");
    }

    #[test]
    fn index_draws_cover_range() {
        let mut r = CounterRng::new(5);
        let mut seen = [0usize; 7];
        for _ in 0..7000 {
            seen[r.next_index(7)] += 1;
        }
        for (i, &c) in seen.iter().enumerate() {
            assert!(c > 700, "index {i} undersampled: {c}");
        }
    }
}
