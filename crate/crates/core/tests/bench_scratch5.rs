use varjoint::likelihood::PriorConfig;
use varjoint::sampler::SamplerConfig;
use varjoint::simulate::{run_study, FitMethod, SimTruth};

#[test]
#[ignore]
fn setting1_study_r20() {
    let truth = SimTruth::setting1().desk();
    let cfg = SamplerConfig { chains: 3, iterations: 2000, burnin: 1000, ..SamplerConfig::default() };
    let t0 = std::time::Instant::now();
    let joint = run_study(&truth, 50, FitMethod::Joint, &PriorConfig::default(), &cfg, 424242).unwrap();
    eprintln!("setting1 joint study (R=50): {:?}", t0.elapsed());
    for c in &joint.coefficients {
        eprintln!("J {}: cov {:.1}% ail {:.2} bias {:+.3} rmse {:.3}", c.parameter, c.coverage, c.ail, c.bias, c.rmse);
    }
    let mx = joint.max_rhats.iter().cloned().fold(0.0f64, f64::max);
    eprintln!("max rhat across replicates: {mx:.4}");
    eprintln!("all rhats: {:?}", joint.max_rhats.iter().map(|r| (r*1000.0).round()/1000.0).collect::<Vec<_>>());
    eprintln!("failures: {:?}", joint.failures);
}
