//! Randomized property sweeps behind `recharge verify` and `recharge oracle`.
//!
//! Each sweep reports the number of trials, the number of failures and the
//! worst margin seen (the smallest slack; negative beyond tolerance is a
//! failure). All draws come from fixed RNG streams, so a sweep with the same
//! arguments always reports the same numbers.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::gamma;
use crate::instances::{generate, GeneratorKind, HeavisideSpec, Instance, PayoffFunction};
use crate::lp::{self, DelayProfile, TOL};
use crate::oracle::{
    concave_closure_exact, correlation_gap_check, dp_opt, exclusive_coupling_check, multilinear_exact, WeightedRank,
    DEFAULT_BUDGET, ORACLE_TOL,
};
use crate::rng;
use crate::scheduler::init_schedule;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub trials: usize,
    pub failures: usize,
    pub worst_margin: f64,
}

impl CheckReport {
    fn new(check: &str) -> Self {
        Self {
            check: check.to_string(),
            trials: 0,
            failures: 0,
            worst_margin: f64::INFINITY,
        }
    }

    /// Records one trial whose slack is `margin` (fails below `-tol`).
    fn record(&mut self, margin: f64, tol: f64) {
        self.trials += 1;
        if margin.is_nan() || margin < -tol {
            self.failures += 1;
        }
        if margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
        }
    }

    fn fail(&mut self) {
        self.trials += 1;
        self.failures += 1;
        self.worst_margin = f64::NEG_INFINITY;
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.trials > 0
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    rng::stream(seed, rng::SWEEP_STREAM_BASE + trial as u64)
}

const KINDS: [GeneratorKind; 3] = [
    GeneratorKind::Heaviside,
    GeneratorKind::Concave,
    GeneratorKind::RandomMonotone,
];

/// A random instance with `k` drawn from `ks`, `k < n <= max_n`, `tau_max <= max_tau`.
pub fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, max_tau: usize, ks: &[usize]) -> Instance {
    let k = *ks.choose(rng).expect("non-empty k list");
    let n = rng.gen_range(k + 1..=max_n.max(k + 1));
    let tau_max = rng.gen_range(1..=max_tau);
    let kind = *KINDS.choose(rng).expect("non-empty kinds");
    generate(kind, n, tau_max, k, rng.gen()).expect("valid generator parameters")
}

/// Random weighted-rank input with `n <= max_n`, `k ∈ {1,2,3}`.
pub fn random_rank_input(rng: &mut ChaCha8Rng, max_n: usize) -> (WeightedRank, Vec<f64>) {
    let n = rng.gen_range(1..=max_n);
    let k = rng.gen_range(1..=3);
    let weights: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    // Mix interior points with boundary coordinates.
    let y: Vec<f64> = (0..n)
        .map(|_| match rng.gen_range(0..10) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.gen::<f64>(),
        })
        .collect();
    (WeightedRank::new(weights, k).expect("valid weights"), y)
}

/// Vertex sparsity: every solve is a vertex with `‖x‖₀ <= supported + 1` and
/// at most one irregular arm.
pub fn lp_sparsity(trials: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("lp_sparsity");
    for trial in 0..trials {
        let mut r = trial_rng(seed, trial);
        let inst = random_instance(&mut r, 8, 6, &[1, 2, 3]);
        match lp::solve_extreme(&lp::build_lp(&inst)) {
            Ok(sol) => {
                let slack = (sol.supported_arms().len() + 1) as f64 - sol.nonzeros.len() as f64;
                match lp::extract_profile(&sol) {
                    Ok(_) => report.record(slack, 0.0),
                    Err(e) => {
                        log::warn!("lp_sparsity trial {trial}: {e}");
                        report.fail();
                    }
                }
            }
            Err(e) => {
                log::warn!("lp_sparsity trial {trial}: {e}");
                report.fail();
            }
        }
    }
    report
}

/// `T · V* >= opt(T)` for `T ∈ {5, 10, 20}` on small instances.
pub fn lp_upper_bound(trials: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("lp_upper_bound");
    for trial in 0..trials {
        let mut r = trial_rng(seed, trial);
        let inst = random_instance(&mut r, 4, 4, &[1, 2]);
        let Ok(sol) = lp::solve_extreme(&lp::build_lp(&inst)) else {
            report.fail();
            continue;
        };
        for horizon in [5, 10, 20] {
            match dp_opt(&inst, horizon, DEFAULT_BUDGET) {
                Ok(opt) => report.record(horizon as f64 * sol.value - opt, ORACLE_TOL),
                Err(_) => report.fail(),
            }
        }
    }
    report
}

/// Extending the variables to `τ ∈ [2·τ^max]` leaves `V*` unchanged.
pub fn lp_support_truncation(trials: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("lp_support_truncation");
    for trial in 0..trials {
        let mut r = trial_rng(seed, trial);
        let inst = random_instance(&mut r, 6, 5, &[1, 2, 3]);
        let base = lp::solve_extreme(&lp::build_lp(&inst));
        let wide = lp::solve_extreme(&lp::build_lp_extended(&inst, 2 * inst.tau_max()));
        match (base, wide) {
            (Ok(a), Ok(b)) => report.record(ORACLE_TOL - (a.value - b.value).abs(), 0.0),
            _ => report.fail(),
        }
    }
    report
}

/// `V*` dominates random feasible points of the polytope.
pub fn lp_objective_optimality(trials: usize, points: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("lp_objective_optimality");
    for trial in 0..trials {
        let mut r = trial_rng(seed, trial);
        let inst = random_instance(&mut r, 6, 5, &[1, 2, 3]);
        let Ok(sol) = lp::solve_extreme(&lp::build_lp(&inst)) else {
            report.fail();
            continue;
        };
        let best = (0..points)
            .map(|_| random_feasible_point(&inst, &mut r))
            .fold(f64::NEG_INFINITY, f64::max);
        report.record(sol.value - best, ORACLE_TOL);
    }
    report
}

/// Samples a point of the polytope and returns its objective. Each arm's row
/// is filled by a random scaled direction, then the whole point is scaled
/// back onto the budget row if it overshoots.
fn random_feasible_point(inst: &Instance, r: &mut ChaCha8Rng) -> f64 {
    let mut used = 0.0;
    let mut value = 0.0;
    for (arm, f) in inst.arms().iter().enumerate() {
        let raw: Vec<f64> = (0..f.recovery_time()).map(|_| r.gen::<f64>()).collect();
        let load: f64 = raw.iter().enumerate().map(|(j, v)| (j + 1) as f64 * v).sum();
        let scale = r.gen::<f64>() / load.max(f64::MIN_POSITIVE);
        for (j, v) in raw.iter().enumerate() {
            let x = v * scale;
            used += x;
            value += x * inst.payoff(arm, j + 1);
        }
    }
    let k = inst.k() as f64;
    if used > k {
        value * k / used
    } else {
        value
    }
}

/// `F >= γ_k f⁺` at random points.
pub fn correlation_gap(trials: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("correlation_gap");
    for trial in 0..trials {
        let mut r = trial_rng(seed, trial);
        let (f, y) = random_rank_input(&mut r, 8);
        match correlation_gap_check(&f, &y) {
            Ok(rep) => report.record(rep.margin, ORACLE_TOL),
            Err(_) => report.fail(),
        }
    }
    report
}

/// `f⁺ >= F`.
pub fn closure_dominates_multilinear(trials: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("closure_dominates_multilinear");
    for trial in 0..trials {
        let mut r = trial_rng(seed, trial);
        let (f, y) = random_rank_input(&mut r, 8);
        match (concave_closure_exact(&f, &y), multilinear_exact(&f, &y)) {
            (Ok(c), Ok(m)) => report.record(c - m, ORACLE_TOL),
            _ => report.fail(),
        }
    }
    report
}

/// `f⁺(y) >= Σ w_i y_i` whenever `‖y‖₁ <= k`.
pub fn closure_linear_bound(trials: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("closure_linear_bound");
    for trial in 0..trials {
        let mut r = trial_rng(seed, trial);
        let (f, mut y) = random_rank_input(&mut r, 8);
        let norm: f64 = y.iter().sum();
        if norm > f.k() as f64 {
            let target = f.k() as f64 * r.gen::<f64>();
            y.iter_mut().for_each(|v| *v *= target / norm);
        }
        let linear: f64 = f.weights().iter().zip(&y).map(|(w, v)| w * v).sum();
        match concave_closure_exact(&f, &y) {
            Ok(c) => report.record(c - linear, ORACLE_TOL),
            Err(_) => report.fail(),
        }
    }
    report
}

/// Mutually exclusive coupling of two elements never beats independence from below.
pub fn exclusive_coupling(trials: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("exclusive_coupling");
    for trial in 0..trials {
        let mut r = trial_rng(seed, trial);
        let n = r.gen_range(2..=8);
        let k = r.gen_range(1..=3);
        let weights: Vec<f64> = (0..n).map(|_| r.gen::<f64>()).collect();
        let mut y: Vec<f64> = (0..n).map(|_| r.gen::<f64>()).collect();
        let a = r.gen_range(0..n);
        let b = (a + r.gen_range(1..n)) % n;
        let pair = y[a] + y[b];
        if pair > 1.0 {
            let target = r.gen::<f64>();
            y[a] *= target / pair;
            y[b] *= target / pair;
        }
        let f = WeightedRank::new(weights, k).expect("valid weights");
        match exclusive_coupling_check(&f, &y, a, b) {
            Ok(rep) => report.record(rep.gap, ORACLE_TOL),
            Err(_) => report.fail(),
        }
    }
    report
}

/// Instances with a known irregular arm: one with a single fractional delay
/// and one whose irregular arm splits across two delays.
pub fn marginal_instances() -> Vec<(&'static str, Instance)> {
    let single = Instance::new(
        vec![
            HeavisideSpec::new(1.0, 2).expand().expect("valid"),
            PayoffFunction::constant(0.6).expect("valid"),
        ],
        1,
        2,
    )
    .expect("valid");
    let split = Instance::new(
        vec![
            PayoffFunction::new(vec![0.6, 0.9]).expect("valid"),
            HeavisideSpec::new(1.0, 3).expand().expect("valid"),
        ],
        1,
        3,
    )
    .expect("valid");
    vec![("single-delay irregular", single), ("two-delay irregular", split)]
}

/// Empirical `P[i ∈ C_t ∧ τ*_i = τ]` over fresh initializations.
///
/// Returns `(arm, tau, expected, empirical, sigma)` per supported `(arm, tau)`.
pub fn candidate_marginals(
    profile: &DelayProfile,
    n: usize,
    k: usize,
    t: usize,
    inits: usize,
    seed: u64,
) -> Vec<(usize, usize, f64, f64, f64)> {
    let mut cells: Vec<(usize, usize)> = profile.regular.iter().map(|(&a, &tau)| (a, tau)).collect();
    if let Some(ir) = profile.irregular {
        cells.push((ir.arm, ir.tau_a));
        if let Some(tau_b) = ir.tau_b {
            cells.push((ir.arm, tau_b));
        }
    }
    let mut hits = vec![0usize; cells.len()];
    for init in 0..inits {
        let state = init_schedule(profile, n, k, seed.wrapping_add(init as u64)).expect("valid profile");
        let candidates = state.candidates(t);
        for (cell, hit) in cells.iter().zip(&mut hits) {
            if candidates.contains(&cell.0) && state.sampled_delay.get(&cell.0) == Some(&cell.1) {
                *hit += 1;
            }
        }
    }
    cells
        .iter()
        .zip(&hits)
        .map(|(&(arm, tau), &hit)| {
            let p = profile.mass(arm, tau);
            let sigma = (p * (1.0 - p) / inits as f64).sqrt();
            (arm, tau, p, hit as f64 / inits as f64, sigma)
        })
        .collect()
}

/// Candidate marginals within 3σ at a fixed round.
pub fn marginals(inits: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("candidate_marginals");
    for (_, inst) in marginal_instances() {
        let Ok((_, profile)) = lp::plan_profile(&inst) else {
            report.fail();
            continue;
        };
        for (_, _, p, emp, sigma) in candidate_marginals(&profile, inst.n(), inst.k(), 100, inits, seed) {
            report.record(3.0 * sigma - (emp - p).abs(), TOL);
        }
    }
    report
}

/// `γ_k` constants table, truncated to two decimals (rounding would give
/// 0.73 and 0.78 for `k = 2, 3`).
pub fn gamma_table() -> CheckReport {
    let mut report = CheckReport::new("gamma_table");
    for (k, expected) in [(1, 0.63), (2, 0.72), (3, 0.77), (4, 0.80), (5, 0.82), (10, 0.87)] {
        let rounded = (gamma(k) * 100.0).floor() / 100.0;
        report.record(if (rounded - expected).abs() < 1e-12 { 0.0 } else { -1.0 }, 0.0);
    }
    report
}

/// Trial counts for a full `verify` run.
#[derive(Debug, Clone, Copy)]
pub struct VerifyPlan {
    pub sparsity: usize,
    pub upper_bound: usize,
    pub truncation: usize,
    pub optimality: usize,
    pub gap: usize,
    pub coupling: usize,
    pub marginal_inits: usize,
}

impl Default for VerifyPlan {
    fn default() -> Self {
        Self {
            sparsity: 1000,
            upper_bound: 200,
            truncation: 200,
            optimality: 100,
            gap: 1000,
            coupling: 500,
            marginal_inits: 100_000,
        }
    }
}

impl VerifyPlan {
    /// Every count divided by `factor` (at least one trial each).
    pub fn scaled_down(self, factor: usize) -> Self {
        let f = factor.max(1);
        Self {
            sparsity: (self.sparsity / f).max(1),
            upper_bound: (self.upper_bound / f).max(1),
            truncation: (self.truncation / f).max(1),
            optimality: (self.optimality / f).max(1),
            gap: (self.gap / f).max(1),
            coupling: (self.coupling / f).max(1),
            marginal_inits: (self.marginal_inits / f).max(100),
        }
    }
}

/// Runs every sweep with the given trial counts.
pub fn verify_all(plan: VerifyPlan, seed: u64) -> Vec<CheckReport> {
    use rayon::prelude::*;
    let tasks: Vec<Box<dyn Fn() -> CheckReport + Send + Sync>> = vec![
        Box::new(gamma_table),
        Box::new(move || lp_sparsity(plan.sparsity, seed)),
        Box::new(move || lp_upper_bound(plan.upper_bound, seed)),
        Box::new(move || lp_support_truncation(plan.truncation, seed)),
        Box::new(move || lp_objective_optimality(plan.optimality, 100, seed)),
        Box::new(move || correlation_gap(plan.gap, seed)),
        Box::new(move || closure_dominates_multilinear(plan.gap, seed)),
        Box::new(move || closure_linear_bound(plan.gap, seed)),
        Box::new(move || exclusive_coupling(plan.coupling, seed)),
        Box::new(move || marginals(plan.marginal_inits, seed)),
    ];
    tasks.par_iter().map(|task| task()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweeps_pass() {
        for report in verify_all(VerifyPlan::default().scaled_down(50), 1) {
            assert!(report.passed(), "{report:?}");
        }
    }

    #[test]
    fn sweeps_are_deterministic() {
        assert_eq!(lp_sparsity(20, 3), lp_sparsity(20, 3));
        assert_eq!(correlation_gap(20, 3), correlation_gap(20, 3));
    }

    #[test]
    fn marginal_instances_have_expected_profiles() {
        let instances = marginal_instances();
        let (_, single) = lp::plan_profile(&instances[0].1).unwrap();
        assert_eq!(single.irregular.unwrap().tau_b, None);
        let (sol, split) = lp::plan_profile(&instances[1].1).unwrap();
        let ir = split.irregular.unwrap();
        assert_eq!((ir.arm, ir.tau_a, ir.tau_b), (0, 1, Some(2)));
        assert!((ir.x_a - 1.0 / 3.0).abs() < 1e-9 && (ir.x_b - 1.0 / 3.0).abs() < 1e-9);
        assert!((sol.value - (0.5 + 1.0 / 3.0)).abs() < 1e-9);
    }
}
