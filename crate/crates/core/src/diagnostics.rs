//! Convergence diagnostics and posterior summaries.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::MultiChainDraws;

/// Per-parameter posterior summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub parameter: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    pub rhat: f64,
    pub n_draws: usize,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() < 2 {
        0.0
    } else {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    };
    (mean, var)
}

/// Classic Gelman–Rubin potential scale reduction:
/// R̂ = sqrt( ((n−1)/n · W + B/n) / W ) with B the between-chain and W the
/// within-chain variance. Chains are trimmed to the shortest length.
///
/// Degenerate case: if every chain is constant, R̂ is 1 when the constants
/// agree and +∞ when they differ.
pub fn rhat(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::Data("rhat needs at least 2 chains".into()));
    }
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if n < 10 {
        return Err(Error::Data(format!(
            "rhat needs at least 10 draws per chain, found {n}"
        )));
    }
    let m = chains.len() as f64;
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(&c[..n])).collect();
    let w: f64 = stats.iter().map(|s| s.1).sum::<f64>() / m;
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m;
    let b_over_n: f64 =
        stats.iter().map(|s| (s.0 - grand) * (s.0 - grand)).sum::<f64>() / (m - 1.0);
    let nf = n as f64;
    if w == 0.0 {
        return Ok(if b_over_n == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok((((nf - 1.0) / nf * w + b_over_n) / w).sqrt())
}

/// Linear-interpolation quantile (position q·(n−1) into the sorted draws).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Summarize one parameter: pooled mean/sd, equal-tailed 95% interval, R̂.
pub fn summarize(parameter: &str, chains: &[Vec<f64>]) -> Result<PosteriorSummary> {
    let mut pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    if pooled.is_empty() {
        return Err(Error::Data(format!("no draws for {parameter}")));
    }
    let (mean, var) = mean_var(&pooled);
    let r = rhat(chains)?;
    pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(PosteriorSummary {
        parameter: parameter.to_string(),
        mean,
        sd: var.sqrt(),
        q025: quantile(&pooled, 0.025),
        q975: quantile(&pooled, 0.975),
        rhat: r,
        n_draws: pooled.len(),
    })
}

/// Summaries for every monitored parameter of a fit.
pub fn summarize_all(draws: &MultiChainDraws) -> Result<Vec<PosteriorSummary>> {
    let names = draws.names().to_vec();
    names
        .iter()
        .enumerate()
        .map(|(idx, name)| summarize(name, &draws.per_chain(idx)))
        .collect()
}

/// Write the summary CSV (`parameter,mean,sd,lo95,hi95,rhat`).
pub fn write_summary_csv(
    path: &Path,
    summaries: &[PosteriorSummary],
    comment: Option<&str>,
) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    if let Some(c) = comment {
        writeln!(file, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["parameter", "mean", "sd", "lo95", "hi95", "rhat", "n_draws"])?;
    for s in summaries {
        w.write_record([
            s.parameter.as_str(),
            &s.mean.to_string(),
            &s.sd.to_string(),
            &s.q025.to_string(),
            &s.q975.to_string(),
            &s.rhat.to_string(),
            &s.n_draws.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::seeded_rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn identical_constant_chains_give_one() {
        let chains = vec![vec![2.5; 100], vec![2.5; 100], vec![2.5; 100]];
        assert_eq!(rhat(&chains).unwrap(), 1.0);
    }

    #[test]
    fn distinct_constant_chains_flag_infinity() {
        let chains = vec![vec![1.0; 50], vec![2.0; 50]];
        assert!(rhat(&chains).unwrap().is_infinite());
    }

    #[test]
    fn convergent_chains_are_near_one() {
        let mut rng = seeded_rng(41, &[0]);
        let chains: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..10_000).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let r = rhat(&chains).unwrap();
        assert!(r < 1.01, "rhat {r}");
    }

    #[test]
    fn separated_chains_exceed_two() {
        let mut rng = seeded_rng(42, &[0]);
        let c1: Vec<f64> = (0..1000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let c2: Vec<f64> = (0..1000)
            .map(|_| 5.0 + rng.sample::<f64, _>(StandardNormal))
            .collect();
        // Closed form with W ≈ 1, B/n ≈ (5/2)² · 2 ≈ 12.5: R̂ ≈ sqrt(13.5) ≈ 3.7.
        let r = rhat(&[c1, c2]).unwrap();
        assert!(r > 2.0, "rhat {r}");
        assert!(r < 5.0, "rhat {r}");
    }

    #[test]
    fn rhat_is_affine_invariant() {
        let mut rng = seeded_rng(43, &[0]);
        let chains: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                (0..500)
                    .map(|_| i as f64 * 0.3 + rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let transformed: Vec<Vec<f64>> = chains
            .iter()
            .map(|c| c.iter().map(|x| -7.0 + 3.5 * x).collect())
            .collect();
        assert_abs_diff_eq!(
            rhat(&chains).unwrap(),
            rhat(&transformed).unwrap(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn quantile_convention_hand_cases() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert_eq!(quantile(&xs, 0.5), 2.5);
        // position 0.025·3 = 0.075 → 1 + 0.075·(2−1).
        assert_abs_diff_eq!(quantile(&xs, 0.025), 1.075, epsilon = 1e-12);
        let ys = [10.0, 20.0];
        assert_abs_diff_eq!(quantile(&ys, 0.25), 12.5, epsilon = 1e-12);
    }

    #[test]
    fn too_few_chains_or_draws_is_an_error() {
        assert!(rhat(&[vec![1.0; 100]]).is_err());
        assert!(rhat(&[vec![1.0; 5], vec![2.0; 5]]).is_err());
    }
}
