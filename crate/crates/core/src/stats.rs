//! Small statistical helpers shared by the Monte Carlo estimators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Independent generator for trial `stream` under a base seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Standard error of a binomial proportion.
pub fn binomial_se(successes: u64, trials: u64) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    (phat * (1.0 - phat) / n).sqrt()
}

/// Pearson statistic and degrees of freedom over cells with positive expectation.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> (f64, usize) {
    let total: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        if p > 0.0 {
            let e = p * total as f64;
            stat += (c as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    (stat, cells.saturating_sub(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn wilson_contains_estimate() {
        for (s, n) in [(0, 10), (3, 10), (10, 10), (500, 1000)] {
            let (lo, hi) = wilson_interval(s, n, Z95);
            let p = s as f64 / n as f64;
            assert!(lo <= p + 1e-15 && p <= hi + 1e-15);
        }
        let (lo, hi) = wilson_interval(0, 100, Z95);
        assert!(lo < 1e-15);
        assert!((hi - 0.03699).abs() < 1e-4);
    }

    #[test]
    fn streams_differ_and_repeat() {
        let a: u64 = stream_rng(1, 0).gen();
        let b: u64 = stream_rng(1, 1).gen();
        assert_ne!(a, b);
        assert_eq!(a, stream_rng(1, 0).gen::<u64>());
    }

    #[test]
    fn chi_square_skips_impossible_cells() {
        let (stat, df) = chi_square(&[50, 50, 0], &[0.5, 0.5, 0.0]);
        assert_eq!(stat, 0.0);
        assert_eq!(df, 1);
    }
}
