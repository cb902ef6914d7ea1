//! The LP relaxation of k-RB and its extreme-point structure.
//!
//! Variables `x[i, τ]` are the long-run fraction of rounds in which arm `i`
//! is played at delay `τ`. The program is
//!
//! ```text
//! max  Σ_i Σ_τ p_i(τ) x[i,τ]
//! s.t. Σ_i Σ_τ x[i,τ]        <= k      (budget)
//!      Σ_τ τ x[i,τ]          <= 1      (one row per arm)
//!      x >= 0
//! ```
//!
//! restricted to `τ <= τ_i^max`, which loses nothing because payoffs
//! plateau there. At any vertex every supported arm but at most one carries a
//! single variable equal to `1/τ`; [`extract_profile`] recovers that structure.

mod simplex;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

pub use simplex::{BasicSolution, BasicVar, LinearProgram, Row, RowKind, SolverError};

use crate::instances::Instance;

/// Nonzero / feasibility tolerance.
pub const TOL: f64 = 1e-9;
/// Band for recognising `x = 1/τ`.
pub const CRITICAL_TOL: f64 = 1e-7;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("solver returned a point violating {constraint} by {excess:e}")]
    Infeasible { constraint: String, excess: f64 },
    #[error("solution is not almost-delay-feasible: {detail} (arms {arms:?})")]
    Structure { arms: Vec<usize>, detail: String },
}

/// A variable of the relaxation: arm `arm` played at delay `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DelayVar {
    pub arm: usize,
    pub tau: usize,
}

/// The relaxation for a fixed set of payoff tables.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub program: LinearProgram,
    pub vars: Vec<DelayVar>,
    pub n: usize,
    pub k: usize,
}

impl LpProblem {
    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.program.rows.len()
    }
}

/// Builds the relaxation over `τ ∈ [τ_i^max]` for every arm.
pub fn build_lp(instance: &Instance) -> LpProblem {
    build_from_tables(&instance.tables(), instance.k())
}

/// Builds the relaxation with every arm's variables extended to
/// `τ ∈ [max_delay]` (plateau values beyond the table). Used to check that
/// truncating the support at the recovery time is lossless.
pub fn build_lp_extended(instance: &Instance, max_delay: usize) -> LpProblem {
    let tables: Vec<Vec<f64>> = instance
        .arms()
        .iter()
        .map(|f| {
            (1..=max_delay.max(f.recovery_time()))
                .map(|tau| f.evaluate(tau))
                .collect()
        })
        .collect();
    build_from_tables(&tables, instance.k())
}

/// Builds the relaxation from raw tables (`tables[i][τ-1]`). Tables need not
/// be monotone, which lets the learner plan on empirical estimates.
pub fn build_from_tables(tables: &[Vec<f64>], k: usize) -> LpProblem {
    let n = tables.len();
    let vars: Vec<DelayVar> = tables
        .iter()
        .enumerate()
        .flat_map(|(arm, t)| (1..=t.len()).map(move |tau| DelayVar { arm, tau }))
        .collect();
    let objective = vars.iter().map(|v| tables[v.arm][v.tau - 1]).collect();
    let mut program = LinearProgram::new(objective);
    program.push_row(vec![1.0; vars.len()], RowKind::Le, k as f64);
    for arm in 0..n {
        let coeffs = vars
            .iter()
            .map(|v| if v.arm == arm { v.tau as f64 } else { 0.0 })
            .collect();
        program.push_row(coeffs, RowKind::Le, 1.0);
    }
    LpProblem { program, vars, n, k }
}

/// Basic column of the final basis, named in problem terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisEntry {
    Variable { arm: usize, tau: usize },
    BudgetSlack,
    ArmSlack { arm: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpEntry {
    pub arm: usize,
    pub tau: usize,
    pub x: f64,
}

/// An optimal vertex of the relaxation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub value: f64,
    /// Variables above [`TOL`], sorted by `(arm, tau)`.
    pub nonzeros: Vec<LpEntry>,
    /// The basis identifying the vertex; `None` for hand-built points.
    pub basis: Option<Vec<BasisEntry>>,
}

impl LpSolution {
    pub fn x(&self, arm: usize, tau: usize) -> f64 {
        self.nonzeros
            .iter()
            .find(|e| e.arm == arm && e.tau == tau)
            .map_or(0.0, |e| e.x)
    }

    pub fn supported_arms(&self) -> Vec<usize> {
        let mut arms: Vec<usize> = self.nonzeros.iter().map(|e| e.arm).collect();
        arms.dedup();
        arms
    }

    /// A point given by its nonzero entries, with no basis attached.
    pub fn from_entries(entries: &[(usize, usize, f64)], value: f64) -> Self {
        let mut nonzeros: Vec<LpEntry> = entries
            .iter()
            .filter(|e| e.2 > TOL)
            .map(|&(arm, tau, x)| LpEntry { arm, tau, x })
            .collect();
        nonzeros.sort_by_key(|e| (e.arm, e.tau));
        Self {
            value,
            nonzeros,
            basis: None,
        }
    }
}

/// Solves the relaxation to an optimal basic feasible solution.
pub fn solve_extreme(problem: &LpProblem) -> Result<LpSolution, LpError> {
    let basic = problem.program.solve()?;
    let mut nonzeros: Vec<LpEntry> = problem
        .vars
        .iter()
        .zip(&basic.x)
        .filter(|(_, &x)| x > TOL)
        .map(|(v, &x)| LpEntry {
            arm: v.arm,
            tau: v.tau,
            x,
        })
        .collect();
    nonzeros.sort_by_key(|e| (e.arm, e.tau));

    let total: f64 = nonzeros.iter().map(|e| e.x).sum();
    if total > problem.k as f64 + TOL {
        return Err(LpError::Infeasible {
            constraint: "the budget row".into(),
            excess: total - problem.k as f64,
        });
    }
    for arm in 0..problem.n {
        let load: f64 = nonzeros
            .iter()
            .filter(|e| e.arm == arm)
            .map(|e| e.tau as f64 * e.x)
            .sum();
        if load > 1.0 + TOL {
            return Err(LpError::Infeasible {
                constraint: format!("the delay row of arm {arm}"),
                excess: load - 1.0,
            });
        }
    }

    let basis = basic
        .basis
        .iter()
        .map(|b| match *b {
            BasicVar::Structural(j) => BasisEntry::Variable {
                arm: problem.vars[j].arm,
                tau: problem.vars[j].tau,
            },
            BasicVar::Slack(0) | BasicVar::Artificial(0) => BasisEntry::BudgetSlack,
            BasicVar::Slack(r) | BasicVar::Artificial(r) => BasisEntry::ArmSlack { arm: r - 1 },
        })
        .collect();
    Ok(LpSolution {
        value: basic.value,
        nonzeros,
        basis: Some(basis),
    })
}

/// The fractional arm of an almost-delay-feasible vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IrregularArm {
    pub arm: usize,
    pub tau_a: usize,
    pub x_a: f64,
    pub tau_b: Option<usize>,
    /// Zero when `tau_b` is absent.
    pub x_b: f64,
}

impl IrregularArm {
    /// Probability of sampling `tau_a` as the critical delay.
    pub fn p_a(&self) -> f64 {
        self.tau_a as f64 * self.x_a
    }

    pub fn p_b(&self) -> f64 {
        self.tau_b.map_or(0.0, |tau| tau as f64 * self.x_b)
    }
}

/// Critical delays extracted from a vertex.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DelayProfile {
    /// Regular arm → critical delay `τ*` with `x[i, τ*] = 1/τ*`.
    pub regular: BTreeMap<usize, usize>,
    pub irregular: Option<IrregularArm>,
}

impl DelayProfile {
    pub fn is_empty(&self) -> bool {
        self.regular.is_empty() && self.irregular.is_none()
    }

    pub fn supported_arms(&self) -> Vec<usize> {
        let mut arms: Vec<usize> = self.regular.keys().copied().collect();
        arms.extend(self.irregular.map(|ir| ir.arm));
        arms.sort_unstable();
        arms
    }

    /// LP mass the profile places on `(arm, tau)`.
    pub fn mass(&self, arm: usize, tau: usize) -> f64 {
        if self.regular.get(&arm) == Some(&tau) {
            return 1.0 / tau as f64;
        }
        match self.irregular {
            Some(ir) if ir.arm == arm && ir.tau_a == tau => ir.x_a,
            Some(ir) if ir.arm == arm && ir.tau_b == Some(tau) => ir.x_b,
            _ => 0.0,
        }
    }
}

/// Classifies every supported arm as regular (one variable at `1/τ`) or
/// irregular (one variable below `1/τ`, or two variables). More than one
/// irregular arm means the point is not a vertex and is reported as an error.
pub fn extract_profile(solution: &LpSolution) -> Result<DelayProfile, LpError> {
    let mut by_arm: BTreeMap<usize, Vec<&LpEntry>> = BTreeMap::new();
    for e in solution.nonzeros.iter().filter(|e| e.x > TOL) {
        by_arm.entry(e.arm).or_default().push(e);
    }

    let mut profile = DelayProfile::default();
    let mut irregular: Vec<IrregularArm> = Vec::new();
    let mut overfull = Vec::new();
    for (&arm, entries) in &by_arm {
        match entries.as_slice() {
            [single] => {
                let target = 1.0 / single.tau as f64;
                let gap = single.x - target;
                if gap.abs() <= CRITICAL_TOL {
                    if gap.abs() > TOL {
                        log::debug!(
                            "arm {arm}: x = {} is {gap:e} from 1/{}; classified regular",
                            single.x,
                            single.tau
                        );
                    }
                    profile.regular.insert(arm, single.tau);
                } else if gap < 0.0 {
                    irregular.push(IrregularArm {
                        arm,
                        tau_a: single.tau,
                        x_a: single.x,
                        tau_b: None,
                        x_b: 0.0,
                    });
                } else {
                    return Err(LpError::Structure {
                        arms: vec![arm],
                        detail: format!("x[{arm},{}] = {} exceeds 1/{}", single.tau, single.x, single.tau),
                    });
                }
            }
            [a, b] => irregular.push(IrregularArm {
                arm,
                tau_a: a.tau,
                x_a: a.x,
                tau_b: Some(b.tau),
                x_b: b.x,
            }),
            _ => overfull.push(arm),
        }
    }
    if !overfull.is_empty() {
        return Err(LpError::Structure {
            arms: overfull,
            detail: "arm supported on more than two delays".into(),
        });
    }
    if irregular.len() > 1 {
        return Err(LpError::Structure {
            arms: irregular.iter().map(|ir| ir.arm).collect(),
            detail: format!("{} arms violate the single-critical-delay pattern", irregular.len()),
        });
    }
    if let Some(ir) = irregular.pop() {
        let load = ir.p_a() + ir.p_b();
        if load > 1.0 + TOL {
            return Err(LpError::Structure {
                arms: vec![ir.arm],
                detail: format!("irregular marginals sum to {load} > 1"),
            });
        }
        profile.irregular = Some(ir);
    }
    Ok(profile)
}

/// Builds, solves and extracts in one step.
pub fn plan_profile(instance: &Instance) -> Result<(LpSolution, DelayProfile), LpError> {
    let solution = solve_extreme(&build_lp(instance))?;
    let profile = extract_profile(&solution)?;
    Ok((solution, profile))
}
