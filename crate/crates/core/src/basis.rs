//! Clamped B-spline bases with percentile-based knot placement.
//!
//! The basis is the standard Cox–de Boor construction on an open (clamped)
//! knot vector: boundary breakpoints are repeated `degree + 1` times, so the
//! basis sums to one everywhere on the domain and the first/last basis
//! functions interpolate at the boundaries. Evaluation uses the triangular
//! nonzero-span scheme, which is algebraically identical to the textbook
//! recursion with the 0/0 := 0 convention but never forms a 0/0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fixed B-spline basis: degree, clamped knot vector, and basis count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    degree: usize,
    knots: Vec<f64>,
    basis_count: usize,
}

/// One observation's row of the design matrix, storing only the nonzero span.
///
/// At most `degree + 1` basis functions are nonzero at any point.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    /// Column index of the first stored value.
    pub start: usize,
    pub vals: Vec<f64>,
}

impl SparseRow {
    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        out[self.start..self.start + self.vals.len()].copy_from_slice(&self.vals);
        out
    }

    /// Dot product against a full-length coefficient vector.
    pub fn dot(&self, coefs: &[f64]) -> f64 {
        self.vals
            .iter()
            .zip(&coefs[self.start..])
            .map(|(v, c)| v * c)
            .sum()
    }
}

impl BasisSpec {
    /// Build a clamped basis from strictly increasing breakpoints.
    pub fn from_breakpoints(breakpoints: &[f64], degree: usize) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InsufficientKnots {
                needed: 2,
                found: breakpoints.len(),
            });
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Data(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let b = breakpoints.len();
        let basis_count = b + degree - 1;
        let mut knots = Vec::with_capacity(b + 2 * degree);
        for _ in 0..degree {
            knots.push(breakpoints[0]);
        }
        knots.extend_from_slice(breakpoints);
        for _ in 0..degree {
            knots.push(breakpoints[b - 1]);
        }
        Ok(Self {
            degree,
            knots,
            basis_count,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions L.
    pub fn basis_count(&self) -> usize {
        self.basis_count
    }

    /// Inclusive domain covered by the basis.
    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    /// Greville abscissa of basis function `l`: the characteristic time
    /// location of its coefficient (mean of its `degree` interior knots).
    pub fn greville(&self, l: usize) -> f64 {
        if self.degree == 0 {
            return 0.5 * (self.knots[l] + self.knots[l + 1]);
        }
        let s: f64 = self.knots[l + 1..=l + self.degree].iter().sum();
        s / self.degree as f64
    }

    /// Index `mu` with knots[mu] <= t < knots[mu+1] (right boundary maps to
    /// the last nonempty span).
    fn find_span(&self, t: f64) -> Result<usize> {
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfDomain { t, lo, hi });
        }
        let idx = self.knots.partition_point(|&k| k <= t);
        // idx is 1 past the last knot <= t; valid spans are degree..=L-1.
        Ok((idx - 1).min(self.basis_count - 1).max(self.degree))
    }

    /// The `degree + 1` nonzero basis values at `t` for span `mu`.
    fn nonzero_values(&self, t: f64, mu: usize) -> Vec<f64> {
        let d = self.degree;
        let mut n = vec![0.0; d + 1];
        let mut left = vec![0.0; d + 1];
        let mut right = vec![0.0; d + 1];
        n[0] = 1.0;
        for j in 1..=d {
            left[j] = t - self.knots[mu + 1 - j];
            right[j] = self.knots[mu + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        n
    }

    /// Evaluate all L basis functions at `t`.
    pub fn basis_eval(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.design_row(t)?.to_dense(self.basis_count))
    }

    /// Evaluate the nonzero span at `t` as a sparse design row.
    pub fn design_row(&self, t: f64) -> Result<SparseRow> {
        let mu = self.find_span(t)?;
        let vals = self.nonzero_values(t, mu);
        Ok(SparseRow {
            start: mu - self.degree,
            vals,
        })
    }
}

/// Place breakpoints at every `percentile_step` percentile of `times`
/// (deduplicated exactly), then clamp into a degree-`degree` basis.
///
/// `times` must be sorted ascending and nonempty; `percentile_step` in
/// (0, 50]. Heavy ties in `times` can collapse percentile values; at least
/// two distinct breakpoints must survive.
pub fn build_knots(times: &[f64], percentile_step: f64, degree: usize) -> Result<BasisSpec> {
    if times.is_empty() {
        return Err(Error::Data("cannot place knots on empty times".into()));
    }
    if !(percentile_step > 0.0 && percentile_step <= 50.0) {
        return Err(Error::Domain(format!(
            "percentile_step must be in (0, 50], got {percentile_step}"
        )));
    }
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Data("times must be sorted ascending".into()));
    }
    let mut breakpoints = Vec::new();
    let mut q = 0.0;
    loop {
        breakpoints.push(percentile(times, q));
        if q >= 100.0 {
            break;
        }
        q = (q + percentile_step).min(100.0);
    }
    breakpoints.dedup();
    if breakpoints.len() < 2 {
        return Err(Error::InsufficientKnots {
            needed: 2,
            found: breakpoints.len(),
        });
    }
    BasisSpec::from_breakpoints(&breakpoints, degree)
}

/// Linear-interpolation percentile (the common "type 7" convention):
/// position q/100 · (n − 1) into the sorted sample.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = (q / 100.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    use crate::math::seeded_rng;

    /// Reference implementation: the textbook recursion with 0/0 := 0,
    /// half-open indicator spans except at the right boundary.
    pub(crate) fn naive_basis(knots: &[f64], degree: usize, l: usize, t: f64) -> f64 {
        if degree == 0 {
            let last_nonempty = knots
                .windows(2)
                .rposition(|w| w[0] < w[1])
                .expect("degenerate knot vector");
            let in_span = if l == last_nonempty {
                knots[l] <= t && t <= knots[l + 1]
            } else {
                knots[l] <= t && t < knots[l + 1]
            };
            return if in_span { 1.0 } else { 0.0 };
        }
        let term = |num: f64, den: f64, v: f64| if den == 0.0 { 0.0 } else { num / den * v };
        let a = term(
            t - knots[l],
            knots[l + degree] - knots[l],
            naive_basis(knots, degree - 1, l, t),
        );
        let b = term(
            knots[l + 1 + degree] - t,
            knots[l + 1 + degree] - knots[l + 1],
            naive_basis(knots, degree - 1, l + 1, t),
        );
        a + b
    }

    #[test]
    fn clamped_knot_vector_for_two_point_domain() {
        // times {0, 1}, step 50 → breakpoints {0, 0.5, 1}.
        let spec = build_knots(&[0.0, 1.0], 50.0, 3).unwrap();
        assert_eq!(
            spec.knots(),
            &[0.0, 0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0, 1.0]
        );
        assert_eq!(spec.basis_count(), 5);
    }

    #[test]
    fn uniform_grid_every_second_percentile() {
        let times: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        let spec = build_knots(&times, 2.0, 3).unwrap();
        // Independent count: 51 percentile levels of a strictly increasing
        // grid stay distinct, so L = interior + degree + 1.
        let levels: Vec<f64> = (0..=50).map(|k| percentile(&times, 2.0 * k as f64)).collect();
        let mut distinct = levels.clone();
        distinct.dedup();
        assert_eq!(distinct.len(), 51);
        assert_eq!(spec.basis_count(), (distinct.len() - 2) + 3 + 1);
        assert_eq!(spec.basis_count(), 53);
    }

    #[test]
    fn all_equal_times_is_insufficient() {
        let err = build_knots(&[5.0; 40], 2.0, 3).unwrap_err();
        assert!(matches!(err, Error::InsufficientKnots { .. }));
    }

    #[test]
    fn degree_zero_indicator() {
        let spec = BasisSpec::from_breakpoints(&[0.0, 1.0, 2.0], 0).unwrap();
        assert_eq!(spec.basis_eval(0.5).unwrap(), vec![1.0, 0.0]);
        assert_eq!(spec.basis_eval(1.5).unwrap(), vec![0.0, 1.0]);
        assert_eq!(spec.basis_eval(2.0).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn left_endpoint_is_first_basis() {
        let spec = build_knots(&[0.0, 0.3, 1.2, 2.0, 5.0], 25.0, 3).unwrap();
        let v = spec.basis_eval(spec.domain().0).unwrap();
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-14);
        assert!(v[1..].iter().all(|&x| x.abs() < 1e-14));
    }

    #[test]
    fn partition_of_unity_and_nonnegativity() {
        let times: Vec<f64> = (0..500).map(|i| (i as f64).sqrt()).collect();
        let spec = build_knots(&times, 5.0, 3).unwrap();
        let (lo, hi) = spec.domain();
        let mut rng = seeded_rng(11, &[0]);
        for _ in 0..2000 {
            let t = lo + rng.random::<f64>() * (hi - lo);
            let v = spec.basis_eval(t).unwrap();
            let s: f64 = v.iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "sum {s} at t={t}");
            assert!(v.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn local_support() {
        let spec = BasisSpec::from_breakpoints(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], 3).unwrap();
        let knots = spec.knots().to_vec();
        let mut rng = seeded_rng(12, &[0]);
        for _ in 0..500 {
            let t = rng.random::<f64>() * 5.0;
            let v = spec.basis_eval(t).unwrap();
            for (l, &val) in v.iter().enumerate() {
                if t < knots[l] || t > knots[l + spec.degree() + 1] {
                    assert_eq!(val, 0.0, "t={t} l={l}");
                }
            }
        }
    }

    #[test]
    fn sparse_row_matches_dense_eval() {
        let times: Vec<f64> = (0..300).map(|i| i as f64 * 0.7).collect();
        let spec = build_knots(&times, 4.0, 3).unwrap();
        let (lo, hi) = spec.domain();
        let mut rng = seeded_rng(13, &[0]);
        for _ in 0..1000 {
            let t = lo + rng.random::<f64>() * (hi - lo);
            let row = spec.design_row(t).unwrap();
            assert!(row.vals.len() <= spec.degree() + 1);
            assert_eq!(row.to_dense(spec.basis_count()), spec.basis_eval(t).unwrap());
        }
    }

    #[test]
    fn interior_breakpoint_matches_two_sided_limit() {
        let spec = BasisSpec::from_breakpoints(&[0.0, 1.0, 2.0, 3.0, 4.0], 3).unwrap();
        let t = 2.0;
        let at = spec.basis_eval(t).unwrap();
        let lo = spec.basis_eval(t - 1e-9).unwrap();
        let hi = spec.basis_eval(t + 1e-9).unwrap();
        for l in 0..spec.basis_count() {
            assert_abs_diff_eq!(at[l], lo[l], epsilon = 1e-7);
            assert_abs_diff_eq!(at[l], hi[l], epsilon = 1e-7);
        }
    }

    #[test]
    fn matches_naive_recursion_random_knots() {
        let mut rng = seeded_rng(15, &[0]);
        for _case in 0..50 {
            let b = 2 + (rng.random::<u64>() % 5) as usize; // 2..=6 breakpoints
            let mut breaks: Vec<f64> = (0..b).map(|_| rng.random::<f64>() * 10.0).collect();
            breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
            breaks.dedup();
            if breaks.len() < 2 {
                continue;
            }
            for degree in 1..=3 {
                let spec = BasisSpec::from_breakpoints(&breaks, degree).unwrap();
                let (lo, hi) = spec.domain();
                for _ in 0..40 {
                    let t = lo + rng.random::<f64>() * (hi - lo);
                    let v = spec.basis_eval(t).unwrap();
                    for (l, &val) in v.iter().enumerate() {
                        let expected = naive_basis(spec.knots(), degree, l, t);
                        assert_abs_diff_eq!(val, expected, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn greville_points_are_monotone_and_inside_domain() {
        let times: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let spec = build_knots(&times, 10.0, 3).unwrap();
        let g: Vec<f64> = (0..spec.basis_count()).map(|l| spec.greville(l)).collect();
        assert!(g.windows(2).all(|w| w[0] <= w[1]));
        let (lo, hi) = spec.domain();
        assert!(g.iter().all(|&x| x >= lo && x <= hi));
    }

    #[test]
    fn out_of_domain_is_an_error() {
        let spec = build_knots(&[0.0, 1.0, 2.0], 50.0, 3).unwrap();
        assert!(matches!(
            spec.basis_eval(-0.1),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(
            spec.basis_eval(2.1),
            Err(Error::OutOfDomain { .. })
        ));
    }
}
