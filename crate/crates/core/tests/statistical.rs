//! Monte Carlo checks of the scheduler and the learner against closed forms.

use std::collections::BTreeMap;

use recharge_core::bandit::{explore, required_samples, NoiseModel, StochasticEnv};
use recharge_core::harness::sweeps::candidate_marginals;
use recharge_core::harness::{gamma, run_experiment, Algorithm, ExperimentConfig, InstanceSource, SeedSpec};
use recharge_core::instances::{HeavisideSpec, Instance, PayoffFunction};
use recharge_core::lp::{DelayProfile, IrregularArm};
use recharge_core::oracle::DEFAULT_BUDGET;
use recharge_core::scheduler::{init_schedule, IrregularDraw, Planner};

fn heaviside_constant() -> Instance {
    Instance::new(
        vec![
            HeavisideSpec::new(1.0, 2).expand().unwrap(),
            PayoffFunction::constant(0.6).unwrap(),
        ],
        1,
        2,
    )
    .unwrap()
}

fn fractional_profile() -> DelayProfile {
    DelayProfile {
        regular: BTreeMap::from([(0, 3)]),
        irregular: Some(IrregularArm {
            arm: 1,
            tau_a: 2,
            x_a: 0.3,
            tau_b: None,
            x_b: 0.0,
        }),
    }
}

#[test]
fn irregular_arm_keeps_its_delay_at_rate_tau_times_x() {
    let inits = 100_000;
    let kept = (0..inits)
        .filter(|&s| {
            let st = init_schedule(&fractional_profile(), 2, 1, s).unwrap();
            matches!(st.irregular, Some(IrregularDraw::Kept { tau: 2, .. }))
        })
        .count();
    let p = 0.6;
    let sigma = (p * (1.0 - p) / inits as f64).sqrt();
    let freq = kept as f64 / inits as f64;
    assert!((freq - p).abs() <= 3.0 * sigma, "{freq} vs {p}");
}

#[test]
fn candidate_marginal_of_fractional_arm() {
    let rows = candidate_marginals(&fractional_profile(), 2, 1, 100, 100_000, 3);
    let (_, _, expected, empirical, sigma) = rows.into_iter().find(|r| r.0 == 1).unwrap();
    assert!((expected - 0.3).abs() < 1e-12);
    assert!((empirical - 0.3).abs() <= 3.0 * sigma, "{empirical}");
}

#[test]
fn long_run_payoff_meets_the_guarantee() {
    let inst = heaviside_constant();
    let planner = Planner::new(&inst).unwrap();
    assert!((planner.value - 0.8).abs() < 1e-9);
    let horizon = 100_000;
    let mean = (0..50)
        .map(|s| {
            planner
                .run(&inst, s, horizon)
                .unwrap()
                .iter()
                .map(|r| r.payoff)
                .sum::<f64>()
                / horizon as f64
        })
        .sum::<f64>()
        / 50.0;
    assert!(mean >= gamma(1) * 0.8 - 0.01, "{mean}");
}

#[test]
fn aggregate_rti_mean_meets_the_guarantee() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("instance.json");
    heaviside_constant().save(&path).unwrap();
    let config = ExperimentConfig {
        instance: InstanceSource::File { path },
        algorithms: vec![Algorithm::Rti, Algorithm::Greedy],
        horizon: 20_000,
        seeds: SeedSpec::Range { base: 0, count: 50 },
        noise: NoiseModel::Bernoulli,
        epsilon: None,
        delta: None,
        budget: DEFAULT_BUDGET,
    };
    let result = run_experiment(&config).unwrap();
    let rti = result.aggregate.iter().find(|r| r.algorithm == "rti").unwrap();
    assert!(rti.mean_payoff >= 0.4957, "{rti:?}");
    assert!((rti.gamma_v_star - gamma(1) * 0.8).abs() < 1e-9);
}

#[test]
fn estimates_are_epsilon_accurate_with_high_probability() {
    let inst = Instance::new(
        vec![
            PayoffFunction::new(vec![0.2, 0.5]).unwrap(),
            PayoffFunction::new(vec![0.4, 0.9]).unwrap(),
        ],
        1,
        2,
    )
    .unwrap();
    let (eps, delta) = (0.1, 0.05);
    let m = required_samples(eps, delta, 2, 2).unwrap();
    let reps = 200;
    let covered = (0..reps)
        .filter(|&s| {
            let mut env = StochasticEnv::new(inst.clone(), NoiseModel::Bernoulli, s);
            explore(&mut env, m).estimates.max_error(|i, t| inst.payoff(i, t)) <= eps
        })
        .count();
    let target = 1.0 - delta;
    let sigma = (target * (1.0 - target) / reps as f64).sqrt();
    assert!(covered as f64 / reps as f64 >= target - 3.0 * sigma, "{covered}/{reps}");
}
