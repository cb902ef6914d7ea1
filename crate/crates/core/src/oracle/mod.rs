//! Exact reference computations used to check the planner: the DP optimum
//! `opt(T)` and the multilinear extension / concave closure of the weighted
//! rank function.

mod dp;
mod submodular;

pub use dp::{check_budget, dp_opt, dp_opt_curve, state_count, OracleError, DEFAULT_BUDGET};
pub use submodular::{
    concave_closure_exact, correlation_gap_check, exclusive_coupling_check, multilinear_exact, multilinear_monte_carlo,
    weighted_rank, CouplingReport, Estimate, GapReport, WeightedRank, CLOSURE_LIMIT, MULTILINEAR_LIMIT, ORACLE_TOL,
};

use crate::instances::Instance;
use crate::lp::DelayProfile;

/// Weighted-rank input induced by a delay profile.
///
/// Each regular arm contributes weight `p_i(τ*_i)` with marginal `1/τ*_i`.
/// The irregular arm is split into one copy per candidate delay, with weight
/// `p_ι(τ)` and marginal `x[ι, τ]`. Under the scheduler, the candidate set at
/// any round `t >= τ^max` covers each element with exactly these marginals,
/// independently except that the copies are mutually exclusive.
#[derive(Debug, Clone)]
pub struct ProfileExtension {
    pub rank: WeightedRank,
    pub y: Vec<f64>,
    /// `(arm, delay)` behind each element.
    pub elements: Vec<(usize, usize)>,
    /// Indices of the irregular copies, if there are two.
    pub copies: Option<(usize, usize)>,
}

pub fn profile_extension(instance: &Instance, profile: &DelayProfile) -> Result<ProfileExtension, OracleError> {
    let mut weights = Vec::new();
    let mut y = Vec::new();
    let mut elements = Vec::new();
    for (&arm, &tau) in &profile.regular {
        weights.push(instance.payoff(arm, tau));
        y.push(1.0 / tau as f64);
        elements.push((arm, tau));
    }
    let mut copies = None;
    if let Some(ir) = profile.irregular {
        let first = weights.len();
        weights.push(instance.payoff(ir.arm, ir.tau_a));
        y.push(ir.x_a);
        elements.push((ir.arm, ir.tau_a));
        if let Some(tau_b) = ir.tau_b {
            weights.push(instance.payoff(ir.arm, tau_b));
            y.push(ir.x_b);
            elements.push((ir.arm, tau_b));
            copies = Some((first, first + 1));
        }
    }
    Ok(ProfileExtension {
        rank: WeightedRank::new(weights, instance.k())?,
        y,
        elements,
        copies,
    })
}
