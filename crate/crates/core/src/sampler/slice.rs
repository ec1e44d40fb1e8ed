//! Univariate slice sampler (step-out and shrinkage) on (0, ∞).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Maximum step-out expansions per side; effectively unlimited, but keeps
/// the interval procedure well-defined (limited step-out stays a valid
/// update when paired with shrinkage).
const MAX_STEPOUT: usize = 10_000;

const MAX_SHRINK: usize = 1_000;

/// Draw from the density ∝ exp(logf) restricted to x > 0, starting at `x0`
/// with initial interval width `w`.
///
/// `logf` must be finite at `x0` and return −∞ for x ≤ 0.
pub fn slice_sample_positive<F: Fn(f64) -> f64>(
    logf: F,
    x0: f64,
    w: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let f0 = logf(x0);
    debug_assert!(f0.is_finite(), "slice sampler started at zero density");
    let level = f0 + rng.random::<f64>().ln();

    let u: f64 = rng.random();
    let mut lo = x0 - w * u;
    let mut hi = lo + w;
    let split = (rng.random::<f64>() * MAX_STEPOUT as f64) as usize;
    let mut j = split;
    let mut k = MAX_STEPOUT - 1 - split;
    while j > 0 && lo > 0.0 && logf(lo) > level {
        lo -= w;
        j -= 1;
    }
    lo = lo.max(0.0);
    while k > 0 && logf(hi) > level {
        hi += w;
        k -= 1;
    }

    for _ in 0..MAX_SHRINK {
        let x1 = lo + rng.random::<f64>() * (hi - lo);
        if logf(x1) > level {
            return x1;
        }
        if x1 < x0 {
            lo = x1;
        } else {
            hi = x1;
        }
    }
    x0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::seeded_rng;

    #[test]
    fn samples_half_normal_moments() {
        // Half-normal with scale 2: E[X] = 2·√(2/π), E[X²] = 4.
        let logf = |x: f64| {
            if x <= 0.0 {
                f64::NEG_INFINITY
            } else {
                -x * x / 8.0
            }
        };
        let mut rng = seeded_rng(31, &[0]);
        let mut x = 1.0;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        let n = 50_000;
        for _ in 0..n {
            x = slice_sample_positive(logf, x, 1.5, &mut rng);
            sum += x;
            sumsq += x * x;
        }
        let mean = sum / n as f64;
        let m2 = sumsq / n as f64;
        assert!((mean - 2.0 * (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.03);
        assert!((m2 - 4.0).abs() < 0.1);
    }

    #[test]
    fn stays_positive() {
        let logf = |x: f64| {
            if x <= 0.0 {
                f64::NEG_INFINITY
            } else {
                -(x.ln()).powi(2)
            }
        };
        let mut rng = seeded_rng(32, &[0]);
        let mut x = 0.5;
        for _ in 0..5_000 {
            x = slice_sample_positive(logf, x, 0.7, &mut rng);
            assert!(x > 0.0);
        }
    }
}
