//! Experiment plumbing: the approximation constant, run configuration,
//! seeded replication, CSV output and the verification sweeps.

pub mod experiment;
pub mod sweeps;

pub use experiment::{
    hash_json, mean_and_std_err, run_experiment, write_csv, write_outputs, AggregateRow, Algorithm, ExperimentConfig,
    ExperimentError, ExperimentResult, InstanceSource, SeedRow, SeedSpec,
};

/// `γ_k = 1 − k^k / (e^k k!)`, evaluated in log space.
///
/// `k = 1` gives `1 − 1/e`; the sequence increases towards 1.
pub fn gamma(k: usize) -> f64 {
    assert!(k >= 1, "gamma is defined for k >= 1");
    let kf = k as f64;
    let log_factorial: f64 = (2..=k).map(|i| (i as f64).ln()).sum();
    1.0 - (kf * kf.ln() - kf - log_factorial).exp()
}
