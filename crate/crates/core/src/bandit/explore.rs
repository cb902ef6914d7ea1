//! Exploration phase: collect `m` samples of every `(arm, delay)` pair with
//! `delay ∈ [τ^max]`, each taken at exactly that delay.
//!
//! Arms are dealt round-robin to `k` slots. Within a slot arms are served one
//! after another; an arm's first play is at whatever delay it has accrued,
//! then it is replayed at gaps `1` (m times), `2` (m times), …, `τ^max`. Each
//! slot plays one arm per round, so at most `k` arms are played per round and
//! every recorded sample's delay is its target by construction.
//!
//! An arm needs at most `1 + m·τ^max(τ^max+1)/2 <= 2·m·(τ^max)²` rounds and a
//! slot serves at most `⌈n/k⌉ <= 2n/k` arms, so the phase ends within
//! [`EXPLORATION_CONSTANT`]` · n·m·(τ^max)²/k` rounds.

use serde::Serialize;

use super::StochasticEnv;

/// `C` in the round bound `C · n·m·(τ^max)² / k`.
pub const EXPLORATION_CONSTANT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PlannedPull {
    pub arm: usize,
    /// Delay this play samples; `None` for a priming play whose delay is not needed.
    pub target: Option<usize>,
}

/// `rounds[t - 1]` lists the pulls of round `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationPlan {
    pub rounds: Vec<Vec<PlannedPull>>,
    pub m: usize,
    pub tau_max: usize,
}

impl ExplorationPlan {
    pub fn new(n: usize, k: usize, tau_max: usize, m: usize) -> Self {
        let mut rounds: Vec<Vec<PlannedPull>> = Vec::new();
        let mut put = |t: usize, pull: PlannedPull| {
            if rounds.len() < t {
                rounds.resize_with(t, Vec::new);
            }
            rounds[t - 1].push(pull);
        };
        for slot in 0..k.max(1) {
            let mut cursor = 1usize;
            for arm in (slot..n).step_by(k.max(1)) {
                let mut remaining = vec![m; tau_max + 1];
                remaining[0] = 0;
                // The arm has not been played since round 0, so its delay equals the round.
                let first = cursor;
                let target = (first <= tau_max && remaining[first] > 0).then(|| {
                    remaining[first] -= 1;
                    first
                });
                put(first, PlannedPull { arm, target });
                let mut last = first;
                for (tau, left) in remaining.iter_mut().enumerate().skip(1) {
                    while *left > 0 {
                        last += tau;
                        *left -= 1;
                        put(last, PlannedPull { arm, target: Some(tau) });
                    }
                }
                cursor = last + 1;
            }
        }
        for round in &mut rounds {
            round.sort_by_key(|p| p.arm);
        }
        Self { rounds, m, tau_max }
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }
}

/// Rounds the exploration phase takes.
pub fn exploration_rounds(n: usize, k: usize, tau_max: usize, m: usize) -> usize {
    ExplorationPlan::new(n, k, tau_max, m).len()
}

/// Empirical means per `(arm, delay)`, `delay ∈ [τ^max]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateTable {
    /// `means[i][τ-1]`
    pub means: Vec<Vec<f64>>,
    pub counts: Vec<Vec<usize>>,
}

impl EstimateTable {
    pub fn new(n: usize, tau_max: usize) -> Self {
        Self {
            means: vec![vec![0.0; tau_max]; n],
            counts: vec![vec![0; tau_max]; n],
        }
    }

    /// Running-mean update; repeated identical samples leave the mean exactly
    /// equal to that sample.
    pub fn record(&mut self, arm: usize, tau: usize, value: f64) {
        let c = &mut self.counts[arm][tau - 1];
        *c += 1;
        let mean = &mut self.means[arm][tau - 1];
        *mean += (value - *mean) / *c as f64;
    }

    pub fn tau_max(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Estimate at `delay`, plateauing at `τ^max`.
    pub fn estimate(&self, arm: usize, delay: usize) -> f64 {
        self.means[arm][delay.min(self.tau_max()) - 1]
    }

    pub fn min_count(&self) -> usize {
        self.counts.iter().flatten().copied().min().unwrap_or(0)
    }

    pub fn max_error(&self, truth: impl Fn(usize, usize) -> f64) -> f64 {
        self.means
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &m)| (i, j + 1, m)))
            .map(|(i, tau, m)| (m - truth(i, tau)).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleRecord {
    pub round: usize,
    pub arm: usize,
    pub target: usize,
    pub actual_delay: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct Exploration {
    pub estimates: EstimateTable,
    pub rounds_used: usize,
    /// Realized payoff of each exploration round.
    pub realized: Vec<f64>,
    pub samples: Vec<SampleRecord>,
    /// Last play round of every arm when the phase ends.
    pub last_play: Vec<usize>,
}

/// Runs the exploration plan against the environment.
pub fn explore(env: &mut StochasticEnv, m: usize) -> Exploration {
    let inst = env.instance();
    let (n, k, tau_max) = (inst.n(), inst.k(), inst.tau_max());
    let plan = ExplorationPlan::new(n, k, tau_max, m);
    let mut estimates = EstimateTable::new(n, tau_max);
    let mut last_play = vec![0usize; n];
    let mut realized = Vec::with_capacity(plan.len());
    let mut samples = Vec::with_capacity(n * tau_max * m);
    for (idx, pulls) in plan.rounds.iter().enumerate() {
        let t = idx + 1;
        let mut total = 0.0;
        for pull in pulls {
            let delay = t - last_play[pull.arm];
            let value = env.pull(pull.arm, delay);
            total += value;
            if let Some(target) = pull.target {
                samples.push(SampleRecord {
                    round: t,
                    arm: pull.arm,
                    target,
                    actual_delay: delay,
                    value,
                });
                if delay == target {
                    estimates.record(pull.arm, target, value);
                }
            }
            last_play[pull.arm] = t;
        }
        realized.push(total);
    }
    Exploration {
        estimates,
        rounds_used: plan.len(),
        realized,
        samples,
        last_play,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::NoiseModel;
    use crate::instances::{Instance, PayoffFunction};

    fn env(n: usize, k: usize, tau_max: usize) -> StochasticEnv {
        let arms = (0..n)
            .map(|i| PayoffFunction::new(vec![0.1 * (i + 1) as f64 / n as f64; tau_max]).unwrap())
            .collect();
        StochasticEnv::new(Instance::new(arms, k, tau_max).unwrap(), NoiseModel::Bernoulli, 0)
    }

    #[test]
    fn single_arm_single_delay_takes_m_rounds() {
        let plan = ExplorationPlan::new(1, 1, 1, 10);
        assert_eq!(plan.len(), 10);
        assert!(plan.rounds.iter().all(|r| r.len() == 1 && r[0].target == Some(1)));
    }

    #[test]
    fn samples_are_taken_at_their_target_delay() {
        let mut e = env(2, 1, 2);
        let out = explore(&mut e, 2);
        assert!(out.samples.iter().all(|s| s.actual_delay == s.target));
        assert_eq!(out.estimates.min_count(), 2);
        let bound = EXPLORATION_CONSTANT * 2.0 * 2.0 * 4.0;
        assert!(out.rounds_used as f64 <= bound, "{} > {bound}", out.rounds_used);
    }

    #[test]
    fn at_most_k_pulls_per_round_and_bound_holds() {
        for (n, k, tau_max, m) in [(5, 2, 3, 4), (7, 3, 4, 2), (3, 2, 1, 9), (6, 1, 5, 3)] {
            let plan = ExplorationPlan::new(n, k, tau_max, m);
            assert!(plan.rounds.iter().all(|r| r.len() <= k));
            let bound = EXPLORATION_CONSTANT * (n * m * tau_max * tau_max) as f64 / k as f64;
            assert!(plan.len() as f64 <= bound);
            let mut e = env(n, k, tau_max);
            let out = explore(&mut e, m);
            assert!(out.samples.iter().all(|s| s.actual_delay == s.target));
            assert!(out.estimates.counts.iter().flatten().all(|&c| c == m));
        }
    }

    #[test]
    fn identical_samples_give_exact_mean() {
        let mut table = EstimateTable::new(1, 1);
        for _ in 0..7 {
            table.record(0, 1, 0.1);
        }
        assert_eq!(table.means[0][0], 0.1);
    }
}
