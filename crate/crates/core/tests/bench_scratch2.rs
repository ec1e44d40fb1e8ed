use varjoint::likelihood::PriorConfig;
use varjoint::sampler::SamplerConfig;
use varjoint::simulate::{run_study, FitMethod, SimTruth};

#[test]
#[ignore]
fn small_setting2_compare() {
    let truth = SimTruth::setting2().desk();
    let cfg = SamplerConfig {
        chains: 3,
        iterations: 2000,
        burnin: 1000,
        seed: 7,
        ..SamplerConfig::default()
    };
    let t0 = std::time::Instant::now();
    let ts = run_study(&truth, 40, FitMethod::TwoStage, &PriorConfig::default(), &cfg, 5150).unwrap();
    eprintln!("two-stage study (R=40): {:?}", t0.elapsed());
    for c in &ts.coefficients {
        eprintln!("TS {}: cov {:.1}% ail {:.2} bias {:+.3} rmse {:.3}", c.parameter, c.coverage, c.ail, c.bias, c.rmse);
    }
    eprintln!("failures: {:?}", ts.failures);
    let t1 = std::time::Instant::now();
    let joint = run_study(&truth, 12, FitMethod::Joint, &PriorConfig::default(), &cfg, 5150).unwrap();
    eprintln!("joint study (R=12): {:?}", t1.elapsed());
    for c in &joint.coefficients {
        eprintln!("J  {}: cov {:.1}% ail {:.2} bias {:+.3} rmse {:.3}", c.parameter, c.coverage, c.ail, c.bias, c.rmse);
    }
    eprintln!("joint max_rhats: {:?}", joint.max_rhats);
    eprintln!("failures: {:?}", joint.failures);
}
