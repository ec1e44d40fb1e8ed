use varjoint::diagnostics::summarize_all;
use varjoint::likelihood::PriorConfig;
use varjoint::sampler::{run_chains, SamplerConfig};
use varjoint::simulate::{generate, SimTruth};

#[test]
#[ignore]
fn setting1_subject_recovery() {
    let truth = SimTruth::setting1().desk();
    let (dataset, draws) = generate(&truth, 424242, 0).unwrap();
    let cfg = SamplerConfig {
        chains: 2, iterations: 2000, burnin: 1000,
        monitor_subject_params: true, seed: 31,
        ..SamplerConfig::default()
    };
    let prepared = dataset.prepare().unwrap();
    let out = run_chains(&prepared, &PriorConfig::default(), &truth.scaling, &cfg).unwrap();
    let summaries = summarize_all(&out).unwrap();
    let mut lsw_err = Vec::new();
    let mut lsb_err = Vec::new();
    let mut rho_mean = Vec::new();
    for s in &summaries {
        if let Some(rest) = s.parameter.strip_prefix("log_sigma2_w_s") {
            let idx: usize = rest.split('_').next().unwrap().parse().unwrap();
            lsw_err.push(s.mean - draws.sigma2_w[idx][0].ln());
        } else if let Some(rest) = s.parameter.strip_prefix("log_sigma2_b_s") {
            let idx: usize = rest.split('_').next().unwrap().parse().unwrap();
            lsb_err.push(s.mean - draws.sigma2_b[idx][0].ln());
        } else if s.parameter.starts_with("rho_") {
            rho_mean.push(s.mean);
        } else if ["beta0","alpha_1","alpha_2","alpha_3","v_b_all","psi_b_all","v_w_all","psi_w_all"].contains(&s.parameter.as_str()) {
            eprintln!("{:<10} mean {:>8.3} sd {:>6.3} [{:>7.3},{:>7.3}] rhat {:.3}", s.parameter, s.mean, s.sd, s.q025, s.q975, s.rhat);
        }
    }
    let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let sd = |v: &[f64]| { let mu = m(v); (v.iter().map(|x| (x-mu)*(x-mu)).sum::<f64>() / v.len() as f64).sqrt() };
    eprintln!("log s2w posterior-mean error: mean {:+.3} sd {:.3}", m(&lsw_err), sd(&lsw_err));
    eprintln!("log s2b posterior-mean error: mean {:+.3} sd {:.3}", m(&lsb_err), sd(&lsb_err));
    eprintln!("rho posterior means: mean {:.4} min {:.4} max {:.4}", m(&rho_mean),
        rho_mean.iter().cloned().fold(1.0f64, f64::min), rho_mean.iter().cloned().fold(0.0f64, f64::max));
    eprintln!("truth: v_w = -3.8, v_b = 5.0, rho = 0.998, alpha = (0.3, -1, 0.5)");
}
