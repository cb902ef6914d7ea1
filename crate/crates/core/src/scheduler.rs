//! Randomize-then-interleave scheduling, plus a greedy baseline.
//!
//! Initialization turns a [`DelayProfile`] into a periodic schedule. Each
//! regular arm keeps its critical delay. The irregular arm (if any) samples
//! its critical delay from `{τ_a, τ_b, ∞}` with probabilities
//! `τ_a·x_a`, `τ_b·x_b` and the remainder; `∞` removes it. Every retained arm
//! then draws a uniform offset `r_i ∈ {0, …, τ*_i − 1}`.
//!
//! Arm `i` is a candidate at round `t` iff `t mod τ*_i = r_i`; each round
//! plays the `k` candidates with the highest payoff at their actual delay.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::instances::Instance;
use crate::lp::{self, DelayProfile, LpError, TOL};
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("irregular arm {arm}: sampling probabilities p_a + p_b = {total} exceed 1")]
    ProfileInvariant { arm: usize, total: f64 },
    #[error("profile references arm {arm} but the instance has {n} arms")]
    UnknownArm { arm: usize, n: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Outcome of the irregular arm's randomized rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IrregularDraw {
    Kept { arm: usize, tau: usize },
    Removed { arm: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState {
    /// Retained arm → critical delay.
    pub sampled_delay: BTreeMap<usize, usize>,
    /// Retained arm → offset in `0..τ*`.
    pub offsets: BTreeMap<usize, usize>,
    /// Round of each arm's last play; round 0 means "played just before the start".
    pub last_play: Vec<usize>,
    pub irregular: Option<IrregularDraw>,
    pub k: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundOutcome {
    pub t: usize,
    pub candidates: Vec<usize>,
    pub played: Vec<usize>,
    /// Actual delay of each played arm, aligned with `played`.
    pub delays: Vec<usize>,
    pub payoff: f64,
}

/// Samples critical delays and offsets. Draws come from per-arm RNG streams
/// (see [`crate::rng`]), so one arm's draws do not depend on which other arms
/// are present.
pub fn init_schedule(profile: &DelayProfile, n: usize, k: usize, seed: u64) -> Result<SchedulerState, ScheduleError> {
    for arm in profile.supported_arms() {
        if arm >= n {
            return Err(ScheduleError::UnknownArm { arm, n });
        }
    }
    let mut sampled_delay = profile.regular.clone();
    let mut irregular = None;
    if let Some(ir) = profile.irregular {
        let (p_a, p_b) = (ir.p_a(), ir.p_b());
        if p_a + p_b > 1.0 + TOL {
            return Err(ScheduleError::ProfileInvariant {
                arm: ir.arm,
                total: p_a + p_b,
            });
        }
        let u: f64 = rng::stream(seed, rng::IRREGULAR_STREAM).gen();
        let draw = if u < p_a {
            Some(ir.tau_a)
        } else if u < p_a + p_b {
            ir.tau_b
        } else {
            None
        };
        irregular = Some(match draw {
            Some(tau) => {
                sampled_delay.insert(ir.arm, tau);
                IrregularDraw::Kept { arm: ir.arm, tau }
            }
            None => IrregularDraw::Removed { arm: ir.arm },
        });
    }
    let offsets = sampled_delay
        .iter()
        .map(|(&arm, &tau)| (arm, rng::offset_stream(seed, arm).gen_range(0..tau)))
        .collect();
    Ok(SchedulerState {
        sampled_delay,
        offsets,
        last_play: vec![0; n],
        irregular,
        k,
        seed,
    })
}

impl SchedulerState {
    /// Arms whose period fires at round `t` (`t >= 1`), in index order.
    pub fn candidates(&self, t: usize) -> Vec<usize> {
        self.sampled_delay
            .iter()
            .filter(|&(arm, &tau)| t % tau == self.offsets[arm])
            .map(|(&arm, _)| arm)
            .collect()
    }

    /// Actual delay of arm `i` at round `t`.
    pub fn delay(&self, arm: usize, t: usize) -> usize {
        t - self.last_play[arm]
    }

    /// Plays round `t`: ranks candidates by `payoff(arm, actual_delay)` and
    /// plays the top `k`, ties going to the lower arm index.
    pub fn play_round(&mut self, t: usize, payoff: impl Fn(usize, usize) -> f64) -> RoundOutcome {
        let candidates = self.candidates(t);
        let mut scored: Vec<(usize, usize, f64)> = candidates
            .iter()
            .map(|&arm| {
                let delay = self.delay(arm, t);
                (arm, delay, payoff(arm, delay))
            })
            .collect();
        scored.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
        scored.truncate(self.k);
        scored.sort_by_key(|s| s.0);

        let mut outcome = RoundOutcome {
            t,
            candidates,
            played: Vec::with_capacity(scored.len()),
            delays: Vec::with_capacity(scored.len()),
            payoff: 0.0,
        };
        for (arm, delay, value) in scored {
            self.last_play[arm] = t;
            outcome.played.push(arm);
            outcome.delays.push(delay);
            outcome.payoff += value;
        }
        outcome
    }

    /// Whether `arm` was dropped by the irregular-arm rounding.
    pub fn is_removed(&self, arm: usize) -> bool {
        matches!(self.irregular, Some(IrregularDraw::Removed { arm: a }) if a == arm)
    }
}

/// A fully planned run: LP profile plus the resulting schedule.
#[derive(Debug, Clone)]
pub struct Planner {
    pub value: f64,
    pub profile: DelayProfile,
}

impl Planner {
    pub fn new(instance: &Instance) -> Result<Self, ScheduleError> {
        let (solution, profile) = lp::plan_profile(instance)?;
        Ok(Self {
            value: solution.value,
            profile,
        })
    }

    /// Plays rounds `1..=horizon` against the instance's mean payoffs.
    pub fn run(&self, instance: &Instance, seed: u64, horizon: usize) -> Result<Vec<RoundOutcome>, ScheduleError> {
        let state = init_schedule(&self.profile, instance.n(), instance.k(), seed)?;
        Ok(run_from(state, instance, 1, horizon))
    }
}

/// Plays rounds `start..=end` from an existing state using mean payoffs.
pub fn run_from(mut state: SchedulerState, instance: &Instance, start: usize, end: usize) -> Vec<RoundOutcome> {
    (start..=end)
        .map(|t| state.play_round(t, |arm, delay| instance.payoff(arm, delay)))
        .collect()
}

/// Per-round payoffs of the greedy policy: every round, play the `k` arms
/// with the highest payoff at their current delay (ties to lower index).
pub fn greedy_baseline(instance: &Instance, horizon: usize) -> Vec<f64> {
    let n = instance.n();
    let mut last_play = vec![0usize; n];
    let mut order: Vec<(usize, f64)> = Vec::with_capacity(n);
    (1..=horizon)
        .map(|t| {
            order.clear();
            order.extend((0..n).map(|arm| (arm, instance.payoff(arm, t - last_play[arm]))));
            order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            order.iter().take(instance.k()).fold(0.0, |acc, &(arm, value)| {
                last_play[arm] = t;
                acc + value
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{HeavisideSpec, PayoffFunction};
    use crate::lp::IrregularArm;

    fn regular(pairs: &[(usize, usize)]) -> DelayProfile {
        DelayProfile {
            regular: pairs.iter().copied().collect(),
            irregular: None,
        }
    }

    #[test]
    fn offsets_stay_below_delay() {
        let profile = regular(&[(0, 3), (1, 5), (2, 1)]);
        for seed in 0..200 {
            let st = init_schedule(&profile, 3, 1, seed).unwrap();
            for (arm, tau) in &st.sampled_delay {
                assert!(st.offsets[arm] < *tau);
            }
        }
    }

    #[test]
    fn no_irregular_arm_keeps_regular_map() {
        let profile = regular(&[(0, 3), (2, 2)]);
        let st = init_schedule(&profile, 3, 1, 9).unwrap();
        assert_eq!(st.sampled_delay, profile.regular);
        assert_eq!(st.irregular, None);
    }

    #[test]
    fn candidacy_is_modular() {
        let mut st = init_schedule(&regular(&[(0, 2), (1, 1)]), 2, 1, 0).unwrap();
        st.offsets.insert(0, 1);
        let fires: Vec<usize> = (1..=7).filter(|&t| st.candidates(t).contains(&0)).collect();
        assert_eq!(fires, vec![1, 3, 5, 7]);
        assert!((1..=7).all(|t| st.candidates(t).contains(&1)));
    }

    #[test]
    fn tie_goes_to_lower_index() {
        let mut st = init_schedule(&regular(&[(0, 1), (1, 1), (2, 1)]), 3, 1, 0).unwrap();
        let payoffs = [0.2, 0.9, 0.9];
        let out = st.play_round(1, |arm, _| payoffs[arm]);
        assert_eq!(out.candidates, vec![0, 1, 2]);
        assert_eq!(out.played, vec![1]);
        assert_eq!(out.payoff, 0.9);
        assert_eq!(st.last_play, vec![0, 1, 0]);
    }

    #[test]
    fn empty_candidate_set_plays_nothing() {
        let mut st = init_schedule(&regular(&[(0, 3)]), 2, 1, 0).unwrap();
        st.offsets.insert(0, 2);
        let out = st.play_round(1, |_, _| 1.0);
        assert!(out.candidates.is_empty() && out.played.is_empty());
        assert_eq!(out.payoff, 0.0);
    }

    #[test]
    fn oversubscribed_irregular_arm_is_rejected() {
        let profile = DelayProfile {
            regular: BTreeMap::new(),
            irregular: Some(IrregularArm {
                arm: 0,
                tau_a: 1,
                x_a: 0.7,
                tau_b: Some(2),
                x_b: 0.3,
            }),
        };
        assert!(matches!(
            init_schedule(&profile, 2, 1, 0),
            Err(ScheduleError::ProfileInvariant { arm: 0, .. })
        ));
    }

    #[test]
    fn removed_irregular_arm_never_candidate() {
        let profile = DelayProfile {
            regular: BTreeMap::from([(0, 2)]),
            irregular: Some(IrregularArm {
                arm: 1,
                tau_a: 2,
                x_a: 0.3,
                tau_b: None,
                x_b: 0.0,
            }),
        };
        let mut removed = 0;
        for seed in 0..100 {
            let st = init_schedule(&profile, 2, 1, seed).unwrap();
            if st.is_removed(1) {
                removed += 1;
                assert!((1..50).all(|t| !st.candidates(t).contains(&1)));
            }
        }
        assert!(removed > 0);
    }

    #[test]
    fn offsets_ignore_other_arms() {
        let small = init_schedule(&regular(&[(0, 7)]), 3, 1, 42).unwrap();
        let large = init_schedule(&regular(&[(0, 7), (1, 4), (2, 9)]), 3, 1, 42).unwrap();
        assert_eq!(small.offsets[&0], large.offsets[&0]);
    }

    #[test]
    fn greedy_plays_dominant_arm() {
        let arms = vec![
            PayoffFunction::constant(1.0).unwrap(),
            PayoffFunction::constant(0.4).unwrap(),
        ];
        let inst = Instance::new(arms, 1, 1).unwrap();
        assert!(greedy_baseline(&inst, 50).iter().all(|&p| p == 1.0));
    }

    #[test]
    fn greedy_alternates_on_heaviside() {
        // Zero arm first: ties at delay 1 go to it, so the Heaviside arm
        // is rested every other round.
        let arms = vec![
            PayoffFunction::constant(0.0).unwrap(),
            HeavisideSpec::new(1.0, 2).expand().unwrap(),
        ];
        let inst = Instance::new(arms, 1, 2).unwrap();
        let trace = greedy_baseline(&inst, 6);
        assert_eq!(trace, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        let long = greedy_baseline(&inst, 10_000);
        assert!((long.iter().sum::<f64>() / 10_000.0 - 0.5).abs() < 1e-3);
    }

    #[test]
    fn trace_is_deterministic() {
        let a = HeavisideSpec::new(1.0, 2).expand().unwrap();
        let b = PayoffFunction::constant(0.6).unwrap();
        let inst = Instance::new(vec![a, b], 1, 2).unwrap();
        let planner = Planner::new(&inst).unwrap();
        assert_eq!(planner.run(&inst, 3, 500).unwrap(), planner.run(&inst, 3, 500).unwrap());
    }
}
