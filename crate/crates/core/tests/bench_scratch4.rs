use varjoint::data::Prepared;
use varjoint::likelihood::{log_joint, ParamState, PriorConfig, Scaling};
use varjoint::math::seeded_rng;
use varjoint::sampler::{init_state, GibbsSweeper, SweepMode, kernels};
use varjoint::simulate::{generate, SimTruth};
use rand::Rng;

#[test]
#[ignore]
fn beta0_conditional_geometry() {
    let truth = SimTruth::setting2().desk();
    let (dataset, _) = generate(&truth, 5150, 6).unwrap();
    let prepared: Prepared = dataset.prepare().unwrap();
    let priors = PriorConfig::default();
    let scaling = truth.scaling;
    let mut rng = seeded_rng(777, &[0]);
    let mut state: ParamState = init_state(&prepared, &priors);
    let mut sweeper = GibbsSweeper::new(&prepared, 0.5);
    let mode = SweepMode { adapt_gain: Some(0.3), tally: false, debug_checks: false };
    for sweep in 0..1500 {
        sweeper.sweep(&prepared, &mut state, &priors, &scaling, mode, &mut rng).unwrap();
        if sweep % 150 == 0 {
            // Recompute the beta0 conditional stats at the current state.
            let (prec, num) = kernels::level_conditional(&prepared, &state, &priors).unwrap();
            let mean_rho = state.subjects.iter().map(|s| s.rho).sum::<f64>() / 50.0;
            let mean_lsb = state.subjects.iter().map(|s| s.log_sigma2_b[0]).sum::<f64>() / 50.0;
            eprintln!(
                "sweep {sweep:>5}: beta0 {:>7.2} cond mean {:>7.2} cond sd {:>6.3} rho {:.5} lsb {:.2} lj {:.0}",
                state.global.beta0, num / prec, (1.0 / prec).sqrt(), mean_rho, mean_lsb,
                log_joint(&prepared, &state, &priors, &scaling)
            );
        }
    }
}
