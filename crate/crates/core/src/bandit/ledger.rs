use std::sync::Arc;

use serde::Serialize;

use super::BanditError;
use crate::harness::gamma;
use crate::instances::Instance;
use crate::lp;
use crate::oracle::{dp_opt_curve, OracleError};

/// Reference total payoff for regret.
#[derive(Debug, Clone, PartialEq)]
pub enum Benchmark {
    /// `opt(t)` for `t = 0..=T`, from the DP.
    Exact { curve: Vec<f64> },
    /// `t · V*`, an upper bound on `opt(t)`; regret against it overstates the truth.
    LpBound { value: f64 },
}

impl Benchmark {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            Benchmark::Exact { curve } => curve[t],
            Benchmark::LpBound { value } => t as f64 * value,
        }
    }

    pub fn is_pessimistic(&self) -> bool {
        matches!(self, Benchmark::LpBound { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Benchmark::Exact { .. } => "dp",
            Benchmark::LpBound { .. } => "lp-bound",
        }
    }
}

/// Exact `opt(t)` when the DP fits in `budget`, otherwise `t · V*`.
pub fn benchmark_for(instance: &Instance, horizon: usize, budget: u64) -> Result<Benchmark, BanditError> {
    match dp_opt_curve(instance, horizon, budget) {
        Ok(curve) => Ok(Benchmark::Exact { curve }),
        Err(OracleError::BudgetExceeded { .. }) => {
            let solution = lp::solve_extreme(&lp::build_lp(instance))?;
            Ok(Benchmark::LpBound { value: solution.value })
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerRow {
    pub t: usize,
    pub realized: f64,
    pub cumulative: f64,
    pub benchmark: f64,
    pub regret: f64,
}

/// Per-round realized payoff with `γ_k`-approximate regret accounting:
/// `Reg(t) = γ_k · benchmark(t) − R(t)`.
#[derive(Debug, Clone)]
pub struct RegretLedger {
    gamma: f64,
    benchmark: Arc<Benchmark>,
    realized: Vec<f64>,
}

impl RegretLedger {
    pub fn new(k: usize, benchmark: Arc<Benchmark>) -> Self {
        Self {
            gamma: gamma(k),
            benchmark,
            realized: Vec::new(),
        }
    }

    pub fn push(&mut self, realized: f64) {
        self.realized.push(realized);
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rounds(&self) -> usize {
        self.realized.len()
    }

    pub fn realized(&self) -> &[f64] {
        &self.realized
    }

    /// `R(T)`, summed in round order.
    pub fn total(&self) -> f64 {
        self.realized.iter().sum()
    }

    pub fn benchmark(&self) -> &Benchmark {
        &self.benchmark
    }

    /// True when the benchmark is the LP bound rather than the exact optimum.
    pub fn is_pessimistic(&self) -> bool {
        self.benchmark.is_pessimistic()
    }

    pub fn regret(&self) -> f64 {
        self.gamma * self.benchmark.at(self.rounds()) - self.total()
    }

    pub fn rows(&self) -> Vec<LedgerRow> {
        let mut cumulative = 0.0;
        self.realized
            .iter()
            .enumerate()
            .map(|(idx, &realized)| {
                let t = idx + 1;
                cumulative += realized;
                let benchmark = self.benchmark.at(t);
                LedgerRow {
                    t,
                    realized,
                    cumulative,
                    benchmark,
                    regret: self.gamma * benchmark - cumulative,
                }
            })
            .collect()
    }
}
