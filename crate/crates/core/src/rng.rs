//! Portable pseudo-random generator.
//!
//! xoshiro256** seeded through SplitMix64. Streams depend only on the seed,
//! never on the platform, so recorded histories and learning curves replay
//! bit-for-bit on any machine.

use serde::{Deserialize, Serialize};

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rng64 {
    s: [u64; 4],
}

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Rng64 { s }
    }

    /// Independent child stream keyed by `stream`; does not advance `self`.
    pub fn fork(&self, stream: u64) -> Self {
        let mut sm = self.s[0] ^ self.s[2].rotate_left(17) ^ stream.wrapping_mul(0xD134_2543_DE82_EF95);
        Rng64::new(splitmix64(&mut sm))
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n). `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        // Lemire's multiply-shift with rejection.
        let n = n as u64;
        loop {
            let x = self.next_u64();
            let m = (x as u128) * (n as u128);
            let low = m as u64;
            if low >= n || low >= (n.wrapping_neg() % n) {
                return (m >> 64) as usize;
            }
        }
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Poisson count by inversion sampling. Large rates are split into
    /// chunks so `exp(-rate)` never underflows; a sum of independent
    /// Poisson draws is Poisson with the summed rate.
    pub fn poisson(&mut self, rate: f64) -> u32 {
        if !(rate > 0.0) {
            return 0;
        }
        const CHUNK: f64 = 30.0;
        let mut remaining = rate;
        let mut total = 0u32;
        while remaining > 0.0 {
            let lambda = remaining.min(CHUNK);
            remaining -= lambda;
            total += self.poisson_inversion(lambda);
        }
        total
    }

    fn poisson_inversion(&mut self, lambda: f64) -> u32 {
        let u = self.next_f64();
        let mut k = 0u32;
        let mut p = (-lambda).exp();
        let mut cdf = p;
        while u >= cdf {
            k += 1;
            p *= lambda / k as f64;
            cdf += p;
            if p < 1e-300 && cdf < u {
                // numerical tail guard
                break;
            }
        }
        k
    }

    /// Index drawn proportionally to nonnegative `weights`. Returns `None`
    /// when all weights are zero.
    pub fn categorical(&mut self, weights: &[f64]) -> Option<usize> {
        let total: f64 = weights.iter().filter(|w| **w > 0.0).sum();
        if !(total > 0.0) {
            return None;
        }
        let mut target = self.next_f64() * total;
        let mut last = None;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                last = Some(i);
                if target < w {
                    return Some(i);
                }
                target -= w;
            }
        }
        last
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng64::new(7);
        let mut b = Rng64::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn below_stays_in_range() {
        let mut r = Rng64::new(1);
        let mut seen = [0usize; 5];
        for _ in 0..5000 {
            seen[r.below(5)] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800));
    }

    #[test]
    fn poisson_mean_and_variance() {
        let mut r = Rng64::new(3);
        let n = 20_000;
        let draws: Vec<f64> = (0..n).map(|_| r.poisson(4.0) as f64).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 4.0).abs() < 0.1, "mean {mean}");
        assert!((var - 4.0).abs() < 0.25, "var {var}");
    }

    #[test]
    fn poisson_large_rate_is_chunked() {
        let mut r = Rng64::new(5);
        let n = 2000;
        let mean = (0..n).map(|_| r.poisson(800.0) as f64).sum::<f64>() / n as f64;
        assert!((mean - 800.0).abs() < 3.0, "mean {mean}");
    }

    #[test]
    fn categorical_skips_zero_weights() {
        let mut r = Rng64::new(9);
        for _ in 0..200 {
            assert_eq!(r.categorical(&[0.0, 2.0, 0.0]), Some(1));
        }
        assert_eq!(r.categorical(&[0.0, 0.0]), None);
    }
}
