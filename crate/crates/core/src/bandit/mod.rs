//! Learning with semi-bandit feedback: explore every `(arm, delay)` pair,
//! then plan on the empirical means (explore-then-commit).

mod env;
mod explore;
mod ledger;

use serde::Serialize;
use thiserror::Error;

pub use env::{NoiseModel, StochasticEnv};
pub use explore::{
    exploration_rounds, explore, EstimateTable, Exploration, ExplorationPlan, PlannedPull, SampleRecord,
    EXPLORATION_CONSTANT,
};
pub use ledger::{benchmark_for, Benchmark, LedgerRow, RegretLedger};

use crate::instances::Instance;
use crate::lp::{self, DelayProfile, LpError};
use crate::oracle::OracleError;
use crate::scheduler::{init_schedule, ScheduleError};

/// Slack constant in the robustness bound: with ε-accurate estimates the
/// planner loses at most `C_ROB · k · ε` per round against `γ_k · opt(T)/T`.
/// The LP optimum on the estimates drops by at most `kε`; ranking candidates
/// by estimates instead of true payoffs costs at most another `2kε`.
pub const C_ROB: f64 = 3.0;

#[derive(Debug, Error)]
pub enum BanditError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("horizon {horizon} does not exceed the exploration budget of {budget} rounds (m = {m})")]
    HorizonTooShort { horizon: usize, budget: usize, m: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Samples per `(arm, delay)` for an `ε`-accurate table with probability `1 − δ`:
/// `⌈ln(2·τ^max·n/δ) / (2ε²)⌉`.
pub fn required_samples(epsilon: f64, delta: f64, n: usize, tau_max: usize) -> Result<usize, BanditError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(BanditError::InvalidParameter(format!(
            "epsilon = {epsilon} must lie in (0, 1)"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BanditError::InvalidParameter(format!(
            "delta = {delta} must lie in (0, 1)"
        )));
    }
    if n == 0 || tau_max == 0 {
        return Err(BanditError::InvalidParameter("n and tau_max must be positive".into()));
    }
    let m = (2.0 * tau_max as f64 * n as f64 / delta).ln() / (2.0 * epsilon * epsilon);
    Ok(m.ceil() as usize)
}

/// Horizon-tuned accuracy: `ε = (n·(τ^max)²·ln(τ^max·n·T) / (k·T))^{1/3}`
/// clipped into `(0, 1)`, and `δ = 1/T`.
pub fn tune_epsilon(n: usize, k: usize, tau_max: usize, horizon: usize) -> (f64, f64) {
    let t = horizon.max(2) as f64;
    let (n, k, tau) = (n as f64, k.max(1) as f64, tau_max as f64);
    let eps = (n * tau * tau * (tau * n * t).ln() / (k * t)).cbrt();
    let eps = eps.clamp(1e-12, 1.0 - 1e-9);
    (eps, 1.0 / t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtcParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl EtcParams {
    pub fn tuned(instance: &Instance, horizon: usize) -> Self {
        let (epsilon, delta) = tune_epsilon(instance.n(), instance.k(), instance.tau_max(), horizon);
        Self { epsilon, delta }
    }
}

#[derive(Debug, Clone)]
pub struct EtcOutcome {
    pub ledger: RegretLedger,
    pub m: usize,
    pub exploration_rounds: usize,
    pub estimates: EstimateTable,
    pub profile: DelayProfile,
    /// Planner's LP value on the estimates.
    pub estimated_value: f64,
}

/// Explore-then-commit over rounds `1..=horizon`.
///
/// Phase one runs [`explore`] with `m` from [`required_samples`]. Phase two
/// solves the LP on the estimate tables (no monotonicity required), samples a
/// schedule with `seed`, and plays it from round `rounds_used + 1`, ranking
/// candidates by estimated payoff and collecting realized payoffs from `env`.
pub fn etc_run(
    env: &mut StochasticEnv,
    horizon: usize,
    params: EtcParams,
    seed: u64,
    benchmark: std::sync::Arc<Benchmark>,
) -> Result<EtcOutcome, BanditError> {
    let inst = env.instance().clone();
    let m = required_samples(params.epsilon, params.delta, inst.n(), inst.tau_max())?;
    let budget = exploration_rounds(inst.n(), inst.k(), inst.tau_max(), m);
    if horizon <= budget {
        return Err(BanditError::HorizonTooShort { horizon, budget, m });
    }
    let exploration = explore(env, m);
    let mut ledger = RegretLedger::new(inst.k(), benchmark);
    for &r in &exploration.realized {
        ledger.push(r);
    }

    let problem = lp::build_from_tables(&exploration.estimates.means, inst.k());
    let solution = lp::solve_extreme(&problem)?;
    let profile = lp::extract_profile(&solution)?;
    let mut state = init_schedule(&profile, inst.n(), inst.k(), seed)?;
    state.last_play.clone_from(&exploration.last_play);
    let estimates = &exploration.estimates;
    for t in exploration.rounds_used + 1..=horizon {
        let outcome = state.play_round(t, |arm, delay| estimates.estimate(arm, delay));
        let realized: f64 = outcome
            .played
            .iter()
            .zip(&outcome.delays)
            .fold(0.0, |acc, (&arm, &delay)| acc + env.pull(arm, delay));
        ledger.push(realized);
    }
    Ok(EtcOutcome {
        ledger,
        m,
        exploration_rounds: exploration.rounds_used,
        estimates: exploration.estimates,
        profile,
        estimated_value: solution.value,
    })
}

/// Plans on `estimates` (tables indexed `[arm][τ-1]`) and returns the true
/// mean payoff collected in each round `1..=horizon`.
pub fn run_with_estimates(
    instance: &Instance,
    estimates: &[Vec<f64>],
    seed: u64,
    horizon: usize,
) -> Result<Vec<f64>, BanditError> {
    let solution = lp::solve_extreme(&lp::build_from_tables(estimates, instance.k()))?;
    let profile = lp::extract_profile(&solution)?;
    let mut state = init_schedule(&profile, instance.n(), instance.k(), seed)?;
    let lookup = |arm: usize, delay: usize| estimates[arm][delay.min(estimates[arm].len()) - 1];
    Ok((1..=horizon)
        .map(|t| {
            let out = state.play_round(t, lookup);
            out.played
                .iter()
                .zip(&out.delays)
                .fold(0.0, |acc, (&arm, &delay)| acc + instance.payoff(arm, delay))
        })
        .collect())
}
