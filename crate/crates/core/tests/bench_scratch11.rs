use varjoint::likelihood::PriorConfig;
use varjoint::sampler::SamplerConfig;
use varjoint::simulate::{run_study, FitMethod, SimTruth};

#[test]
#[ignore]
fn setting1_r150() {
    let truth = SimTruth::setting1().desk();
    let cfg = SamplerConfig { chains: 3, iterations: 2000, burnin: 1000, ..SamplerConfig::default() };
    let joint = run_study(&truth, 150, FitMethod::Joint, &PriorConfig::default(), &cfg, 999).unwrap();
    for c in &joint.coefficients {
        eprintln!("R150 {}: cov {:.1}% ail {:.2} bias {:+.3} rmse {:.3}", c.parameter, c.coverage, c.ail, c.bias, c.rmse);
    }
    let over: usize = joint.max_rhats.iter().filter(|&&r| r >= 1.1).count();
    eprintln!("rhat>=1.1: {over}/150, max {:.3}", joint.max_rhats.iter().cloned().fold(0.0f64, f64::max));
}
