//! Exact finite-horizon optimum by dynamic programming over delay vectors.
//!
//! The state is the vector of current delays, each capped at the arm's
//! recovery time (payoffs are flat beyond it, so capping is lossless). A
//! state is encoded in mixed radix with digit `d_i − 1` for arm `i`.

use thiserror::Error;

use crate::instances::Instance;

/// Default cap on `states × horizon`.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("DP needs {states} states × {horizon} rounds = {required} state-rounds, over the budget of {budget}")]
    BudgetExceeded {
        states: u64,
        horizon: usize,
        required: u64,
        budget: u64,
    },
    #[error("{what}: n = {n} exceeds the exact-enumeration limit of {limit}")]
    TooLarge { what: &'static str, n: usize, limit: usize },
    #[error("invalid oracle input: {0}")]
    InvalidInput(String),
    #[error("closure LP failed: {0}")]
    Lp(String),
}

/// Number of capped delay states, or `None` on overflow.
pub fn state_count(instance: &Instance) -> Option<u64> {
    instance
        .arms()
        .iter()
        .try_fold(1u64, |acc, f| acc.checked_mul(f.recovery_time() as u64))
}

/// Checks `states × horizon <= budget` without running the DP.
pub fn check_budget(instance: &Instance, horizon: usize, budget: u64) -> Result<u64, OracleError> {
    let states = state_count(instance).unwrap_or(u64::MAX);
    let required = states.saturating_mul(horizon.max(1) as u64);
    if required > budget {
        return Err(OracleError::BudgetExceeded {
            states,
            horizon,
            required,
            budget,
        });
    }
    Ok(states)
}

/// `opt(T)`: the best total payoff over rounds `1..=T`, all arms starting at delay 1.
pub fn dp_opt(instance: &Instance, horizon: usize, budget: u64) -> Result<f64, OracleError> {
    Ok(*dp_opt_curve(instance, horizon, budget)?
        .last()
        .expect("curve has horizon + 1 entries"))
}

/// `[opt(0), opt(1), …, opt(T)]`. Backward induction on the number of
/// remaining rounds yields every shorter horizon from the same start state.
pub fn dp_opt_curve(instance: &Instance, horizon: usize, budget: u64) -> Result<Vec<f64>, OracleError> {
    let states = check_budget(instance, horizon, budget)? as usize;
    let n = instance.n();
    let caps: Vec<usize> = instance.arms().iter().map(|f| f.recovery_time()).collect();
    let mut strides = vec![1usize; n];
    for i in 1..n {
        strides[i] = strides[i - 1] * caps[i - 1];
    }

    let play_sets = play_sets(n, instance.k());
    // For each state: index of the successor when nothing is played, and each
    // arm's digit in that successor (zeroed by playing the arm).
    let mut idle_next = vec![0usize; states];
    let mut next_digits = vec![0usize; states * n];
    let mut payoffs = vec![0.0f64; states * n];
    for s in 0..states {
        let mut rest = s;
        let mut next = 0;
        for i in 0..n {
            let digit = rest % caps[i];
            rest /= caps[i];
            let nd = (digit + 1).min(caps[i] - 1);
            next += nd * strides[i];
            next_digits[s * n + i] = nd;
            payoffs[s * n + i] = instance.payoff(i, digit + 1);
        }
        idle_next[s] = next;
    }

    let mut value = vec![0.0f64; states];
    let mut scratch = vec![0.0f64; states];
    let mut curve = Vec::with_capacity(horizon + 1);
    curve.push(0.0);
    for _ in 0..horizon {
        for s in 0..states {
            let base = idle_next[s];
            let row_payoff = &payoffs[s * n..s * n + n];
            let row_digits = &next_digits[s * n..s * n + n];
            let mut best = f64::NEG_INFINITY;
            for set in &play_sets {
                let mut gain = 0.0;
                let mut next = base;
                for &i in set {
                    gain += row_payoff[i];
                    next -= row_digits[i] * strides[i];
                }
                let total = gain + value[next];
                if total > best {
                    best = total;
                }
            }
            scratch[s] = best;
        }
        std::mem::swap(&mut value, &mut scratch);
        // Start state: every arm at delay 1, i.e. all digits zero.
        curve.push(value[0]);
    }
    Ok(curve)
}

/// All subsets of `0..n` with at most `k` elements.
fn play_sets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..k {
        let mut grown = Vec::new();
        for set in &frontier {
            let start = set.last().map_or(0, |&l: &usize| l + 1);
            for i in start..n {
                let mut s = set.clone();
                s.push(i);
                grown.push(s);
            }
        }
        out.extend(grown.iter().cloned());
        frontier = grown;
    }
    out
}
