use varjoint::likelihood::PriorConfig;
use varjoint::sampler::SamplerConfig;
use varjoint::simulate::{run_study, FitMethod, SimTruth};

#[test]
#[ignore]
fn setting1_rho09() {
    let mut truth = SimTruth::setting1().desk();
    truth.rho = 0.9;
    let cfg = SamplerConfig { chains: 3, iterations: 2000, burnin: 1000, ..SamplerConfig::default() };
    let joint = run_study(&truth, 30, FitMethod::Joint, &PriorConfig::default(), &cfg, 11).unwrap();
    for c in &joint.coefficients {
        eprintln!("rho0.9 {}: cov {:.1}% ail {:.2} bias {:+.3} rmse {:.3}", c.parameter, c.coverage, c.ail, c.bias, c.rmse);
    }
    let over: usize = joint.max_rhats.iter().filter(|&&r| r >= 1.1).count();
    eprintln!("rhat>=1.1: {over}/30, max {:.3}", joint.max_rhats.iter().cloned().fold(0.0f64, f64::max));
}

#[test]
#[ignore]
fn setting1_n600() {
    let mut truth = SimTruth::setting1();
    truth.n_subjects = 50;  // keep N at desk to isolate n_i
    let cfg = SamplerConfig { chains: 3, iterations: 2000, burnin: 1000, ..SamplerConfig::default() };
    let joint = run_study(&truth, 20, FitMethod::Joint, &PriorConfig::default(), &cfg, 12).unwrap();
    for c in &joint.coefficients {
        eprintln!("n600 {}: cov {:.1}% ail {:.2} bias {:+.3} rmse {:.3}", c.parameter, c.coverage, c.ail, c.bias, c.rmse);
    }
    let over: usize = joint.max_rhats.iter().filter(|&&r| r >= 1.1).count();
    eprintln!("rhat>=1.1: {over}/20, max {:.3}", joint.max_rhats.iter().cloned().fold(0.0f64, f64::max));
}
