//! Scalar probability kernels and deterministic RNG streams.
//!
//! Everything here is pure; sampling helpers take an explicit RNG so that
//! callers control reproducibility.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// ln(2π)
pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal log-density.
pub fn norm_logpdf(x: f64) -> f64 {
    -0.5 * (LN_2PI + x * x)
}

/// Log-density of N(mean, var) at x.
pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// log Φ(x), finite over the full double range.
///
/// Uses the erfc route while erfc stays away from underflow, ln(1 − Φ(−x))
/// on the right where Φ saturates to 1, and the Mills-ratio asymptotic
/// expansion deep in the left tail.
pub fn norm_logcdf(x: f64) -> f64 {
    if x >= 8.0 {
        let sf = 0.5 * libm::erfc(x / std::f64::consts::SQRT_2);
        return (-sf).ln_1p();
    }
    if x >= -30.0 {
        let c = 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2);
        if c > 0.0 {
            return c.ln();
        }
    }
    logcdf_left_tail(x)
}

/// Φ(x) ≈ φ(x)/|x| · (1 − x⁻² + 3x⁻⁴ − 15x⁻⁶ + 105x⁻⁸) for x ≪ 0.
fn logcdf_left_tail(x: f64) -> f64 {
    let inv2 = 1.0 / (x * x);
    let series = 1.0 + inv2 * (-1.0 + inv2 * (3.0 + inv2 * (-15.0 + inv2 * 105.0)));
    norm_logpdf(x) - (-x).ln() + series.ln()
}

/// logit(p) for p in (0, 1).
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Inverse logit.
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Log-density of a Half-Cauchy(0, scale) at x > 0.
pub fn half_cauchy_logpdf(x: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let r = x / scale;
    (2.0 / (std::f64::consts::PI * scale)).ln() - (1.0 + r * r).ln()
}

/// Draw from N(mu, 1) truncated to (lower, ∞).
///
/// Plain rejection near the bulk; Robert's exponential rejection in the
/// tail, which stays efficient for arbitrarily extreme truncation points.
pub fn sample_truncnorm_above(rng: &mut ChaCha8Rng, mu: f64, lower: f64) -> f64 {
    let a = lower - mu;
    if a < 0.45 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z > a {
                return mu + z;
            }
        }
    }
    // Robert (1995) translated-exponential proposal.
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let u1: f64 = rng.random();
        let z = a - u1.ln() / lambda;
        let d = z - lambda;
        let u2: f64 = rng.random();
        if u2 <= (-0.5 * d * d).exp() {
            return mu + z;
        }
    }
}

/// Draw from N(mu, 1) truncated to (−∞, upper).
pub fn sample_truncnorm_below(rng: &mut ChaCha8Rng, mu: f64, upper: f64) -> f64 {
    -sample_truncnorm_above(rng, -mu, -upper)
}

/// splitmix64 finalizer; used to derive independent RNG streams.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream tags that keep RNG streams for different purposes disjoint.
pub mod stream {
    pub const GENERATE: u64 = 0x01;
    pub const CHAIN: u64 = 0x02;
    pub const PPC: u64 = 0x03;
    pub const STUDY: u64 = 0x04;
    pub const OUTCOME: u64 = 0x05;
}

/// Deterministic RNG for a (seed, tag path) pair.
///
/// The same seed with different tag paths yields statistically independent
/// streams; results do not depend on scheduling or worker count.
pub fn seeded_rng(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = mix64(seed ^ 0xA076_1D64_78BD_642F);
    for &t in tags {
        state = mix64(state ^ mix64(t ^ 0xE703_7ED1_A0B4_28DB));
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = mix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
