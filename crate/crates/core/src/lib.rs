//! Planning and learning for multi-armed bandits with recharging payoffs.
//!
//! An arm's expected payoff grows with the number of rounds since it was last
//! played and plateaus at its recovery time. Up to `k` arms are played per
//! round. The crate provides:
//!
//! - [`instances`]: payoff tables, instance generators and the JSON format.
//! - [`lp`]: the LP relaxation, a vertex-returning simplex and critical-delay extraction.
//! - [`scheduler`]: the randomize-then-interleave planner and a greedy baseline.
//! - [`oracle`]: exact DP optimum and exact submodular-extension oracles.
//! - [`bandit`]: stochastic environments and explore-then-commit learning.
//! - [`harness`]: experiment configs, replication, CSV output and verification sweeps.

pub mod bandit;
pub mod harness;
pub mod instances;
pub mod lp;
pub mod oracle;
pub mod rng;
pub mod scheduler;
