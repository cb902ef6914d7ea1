//! Seeded replications of the planners and the learner, with CSV output.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::gamma;
use crate::bandit::{benchmark_for, etc_run, BanditError, Benchmark, EtcParams, NoiseModel, StochasticEnv};
use crate::instances::{generate, GeneratorKind, Instance, InstanceError};
use crate::oracle::DEFAULT_BUDGET;
use crate::scheduler::{greedy_baseline, Planner, ScheduleError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error("failed to write {path}")]
    Io { path: String, source: std::io::Error },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum InstanceSource {
    File {
        path: PathBuf,
    },
    Generate {
        kind: GeneratorKind,
        n: usize,
        tau_max: usize,
        k: usize,
        seed: u64,
    },
}

impl InstanceSource {
    pub fn load(&self) -> Result<Instance, ExperimentError> {
        match self {
            InstanceSource::File { path } => {
                if !path.exists() {
                    return Err(ExperimentError::Config(format!(
                        "instance file {} does not exist",
                        path.display()
                    )));
                }
                Ok(Instance::load(path)?)
            }
            InstanceSource::Generate {
                kind,
                n,
                tau_max,
                k,
                seed,
            } => Ok(generate(*kind, *n, *tau_max, *k, *seed)?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Randomize-then-interleave on the true payoffs.
    Rti,
    Greedy,
    /// Explore-then-commit on noisy feedback.
    Etc,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Rti => "rti",
            Algorithm::Greedy => "greedy",
            Algorithm::Etc => "etc",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rti" => Ok(Algorithm::Rti),
            "greedy" => Ok(Algorithm::Greedy),
            "etc" => Ok(Algorithm::Etc),
            other => Err(ExperimentError::Config(format!(
                "unknown algorithm {other:?} (expected rti, greedy or etc)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range { base: u64, count: u64 },
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(list) => list.clone(),
            SeedSpec::Range { base, count } => (*base..base + count).collect(),
        }
    }
}

fn default_noise() -> NoiseModel {
    NoiseModel::Bernoulli
}

fn default_budget() -> u64 {
    DEFAULT_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub algorithms: Vec<Algorithm>,
    pub horizon: usize,
    pub seeds: SeedSpec,
    #[serde(default = "default_noise")]
    pub noise: NoiseModel,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    /// DP state-round budget for the exact regret benchmark.
    #[serde(default = "default_budget")]
    pub budget: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.seeds.seeds().is_empty() {
            return Err(ExperimentError::Config("seed list is empty".into()));
        }
        if self.algorithms.is_empty() {
            return Err(ExperimentError::Config("no algorithms selected".into()));
        }
        if self.horizon == 0 {
            return Err(ExperimentError::Config("horizon must be positive".into()));
        }
        if let InstanceSource::File { path } = &self.instance {
            if !path.exists() {
                return Err(ExperimentError::Config(format!(
                    "instance file {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        hash_json(self)
    }

    fn etc_params(&self, instance: &Instance) -> EtcParams {
        let tuned = EtcParams::tuned(instance, self.horizon);
        EtcParams {
            epsilon: self.epsilon.unwrap_or(tuned.epsilon),
            delta: self.delta.unwrap_or(tuned.delta),
        }
    }
}

/// Hex SHA-256 of the compact JSON encoding of `value`.
pub fn hash_json<T: Serialize + ?Sized>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("value serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedRow {
    pub algorithm: &'static str,
    pub seed: u64,
    pub rounds: usize,
    pub total_payoff: f64,
    pub mean_payoff: f64,
    /// Mean over rounds `τ^max..=T`.
    pub mean_payoff_after_burn_in: f64,
    /// `γ_k`-approximate regret (learner only).
    pub regret: Option<f64>,
    pub benchmark: Option<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub algorithm: &'static str,
    pub seeds: usize,
    pub mean_payoff: f64,
    pub std_err: f64,
    pub mean_payoff_after_burn_in: f64,
    pub std_err_after_burn_in: f64,
    /// `γ_k · V*`, the per-round guarantee of the planner.
    pub gamma_v_star: f64,
    pub mean_regret: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub v_star: f64,
    pub gamma: f64,
    pub per_seed: Vec<SeedRow>,
    pub aggregate: Vec<AggregateRow>,
}

/// Sample mean and standard error of the mean.
pub fn mean_and_std_err(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn summarize(
    algorithm: Algorithm,
    seed: u64,
    payoffs: &[f64],
    burn_in: usize,
    regret: Option<f64>,
    bench: Option<&'static str>,
) -> SeedRow {
    let total: f64 = payoffs.iter().sum();
    let tail = &payoffs[burn_in.saturating_sub(1).min(payoffs.len())..];
    SeedRow {
        algorithm: algorithm.name(),
        seed,
        rounds: payoffs.len(),
        total_payoff: total,
        mean_payoff: total / payoffs.len() as f64,
        mean_payoff_after_burn_in: tail.iter().sum::<f64>() / tail.len().max(1) as f64,
        regret,
        benchmark: bench,
    }
}

/// Runs every `(algorithm, seed)` pair, in parallel, and aggregates. Rows are
/// ordered by algorithm then seed regardless of completion order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    config.validate()?;
    let instance = config.instance.load()?;
    let planner = Planner::new(&instance)?;
    let g = gamma(instance.k());
    let seeds = config.seeds.seeds();
    let mut algorithms = config.algorithms.clone();
    algorithms.sort();
    algorithms.dedup();

    let benchmark = if algorithms.contains(&Algorithm::Etc) {
        Some(Arc::new(benchmark_for(&instance, config.horizon, config.budget)?))
    } else {
        None
    };
    let params = config.etc_params(&instance);
    let burn_in = instance.tau_max();

    let jobs: Vec<(Algorithm, u64)> = algorithms
        .iter()
        .flat_map(|&a| seeds.iter().map(move |&s| (a, s)))
        .collect();
    let mut per_seed = jobs
        .par_iter()
        .map(|&(algorithm, seed)| -> Result<SeedRow, ExperimentError> {
            Ok(match algorithm {
                Algorithm::Rti => {
                    let trace = planner.run(&instance, seed, config.horizon)?;
                    let payoffs: Vec<f64> = trace.iter().map(|r| r.payoff).collect();
                    summarize(algorithm, seed, &payoffs, burn_in, None, None)
                }
                Algorithm::Greedy => {
                    let payoffs = greedy_baseline(&instance, config.horizon);
                    summarize(algorithm, seed, &payoffs, burn_in, None, None)
                }
                Algorithm::Etc => {
                    let bench: Arc<Benchmark> = benchmark.clone().expect("benchmark computed for etc");
                    let mut env = StochasticEnv::new(instance.clone(), config.noise, seed);
                    let out = etc_run(&mut env, config.horizon, params, seed, bench.clone())?;
                    summarize(
                        algorithm,
                        seed,
                        out.ledger.realized(),
                        burn_in,
                        Some(out.ledger.regret()),
                        Some(bench.label()),
                    )
                }
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    per_seed.sort_by(|a, b| a.algorithm.cmp(b.algorithm).then(a.seed.cmp(&b.seed)));

    let aggregate = algorithms
        .iter()
        .map(|a| {
            let rows: Vec<&SeedRow> = per_seed.iter().filter(|r| r.algorithm == a.name()).collect();
            let means: Vec<f64> = rows.iter().map(|r| r.mean_payoff).collect();
            let tails: Vec<f64> = rows.iter().map(|r| r.mean_payoff_after_burn_in).collect();
            let regrets: Vec<f64> = rows.iter().filter_map(|r| r.regret).collect();
            let (mean_payoff, std_err) = mean_and_std_err(&means);
            let (mean_tail, std_err_tail) = mean_and_std_err(&tails);
            AggregateRow {
                algorithm: a.name(),
                seeds: rows.len(),
                mean_payoff,
                std_err,
                mean_payoff_after_burn_in: mean_tail,
                std_err_after_burn_in: std_err_tail,
                gamma_v_star: g * planner.value,
                mean_regret: (!regrets.is_empty()).then(|| mean_and_std_err(&regrets).0),
            }
        })
        .collect();

    Ok(ExperimentResult {
        config: config.clone(),
        config_hash: config.hash(),
        v_star: planner.value,
        gamma: g,
        per_seed,
        aggregate,
    })
}

pub(crate) fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ExperimentError> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(io_error(path))?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentConfig,
    config_hash: &'a str,
    seeds: Vec<u64>,
    v_star: f64,
    gamma: f64,
    files: [&'static str; 2],
}

/// Writes `per_seed.csv`, `aggregate.csv` and `manifest.json` into `dir`.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    write_csv(&dir.join("per_seed.csv"), &result.per_seed)?;
    write_csv(&dir.join("aggregate.csv"), &result.aggregate)?;
    let manifest = Manifest {
        config: &result.config,
        config_hash: &result.config_hash,
        seeds: result.config.seeds.seeds(),
        v_star: result.v_star,
        gamma: result.gamma,
        files: ["per_seed.csv", "aggregate.csv"],
    };
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(io_error(&path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(algorithms: Vec<Algorithm>) -> ExperimentConfig {
        ExperimentConfig {
            instance: InstanceSource::Generate {
                kind: GeneratorKind::Heaviside,
                n: 4,
                tau_max: 3,
                k: 1,
                seed: 5,
            },
            algorithms,
            horizon: 400,
            seeds: SeedSpec::Range { base: 0, count: 6 },
            noise: NoiseModel::Bernoulli,
            epsilon: None,
            delta: None,
            budget: DEFAULT_BUDGET,
        }
    }

    #[test]
    fn empty_seed_list_is_rejected() {
        let mut c = config(vec![Algorithm::Rti]);
        c.seeds = SeedSpec::List(vec![]);
        assert!(matches!(run_experiment(&c), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn missing_instance_file_is_rejected() {
        let mut c = config(vec![Algorithm::Rti]);
        c.instance = InstanceSource::File {
            path: "/nonexistent/instance.json".into(),
        };
        assert!(matches!(run_experiment(&c), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn shared_seeds_across_algorithms() {
        let result = run_experiment(&config(vec![Algorithm::Greedy, Algorithm::Rti])).unwrap();
        assert_eq!(result.aggregate.len(), 2);
        let rti: Vec<u64> = result
            .per_seed
            .iter()
            .filter(|r| r.algorithm == "rti")
            .map(|r| r.seed)
            .collect();
        let greedy: Vec<u64> = result
            .per_seed
            .iter()
            .filter(|r| r.algorithm == "greedy")
            .map(|r| r.seed)
            .collect();
        assert_eq!(rti, greedy);
        assert_eq!(rti, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn outputs_are_byte_identical_across_runs() {
        let c = config(vec![Algorithm::Rti, Algorithm::Greedy, Algorithm::Etc]);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        write_outputs(&run_experiment(&c).unwrap(), a.path()).unwrap();
        write_outputs(&run_experiment(&c).unwrap(), b.path()).unwrap();
        for file in ["per_seed.csv", "aggregate.csv", "manifest.json"] {
            let x = fs::read(a.path().join(file)).unwrap();
            let y = fs::read(b.path().join(file)).unwrap();
            assert_eq!(x, y, "{file} differs");
            assert!(!x.is_empty());
        }
        let header = fs::read_to_string(a.path().join("per_seed.csv")).unwrap();
        assert!(header.starts_with("algorithm,seed,rounds"));
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = config(vec![Algorithm::Etc]);
        let text = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }
}
