//! `recharge`: generate instances, solve the LP relaxation, run the planner
//! and the learner, and check the analysis numerically.
//!
//! Every subcommand writes its files into `--out` (default: `$RECHARGE_OUT_DIR`,
//! else `./recharge-out`) together with a `manifest.json` naming the command,
//! its arguments and their hash. Exit status is 0 on success, 1 when a
//! verification check fails and 2 on any configuration or input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use recharge_core::bandit::{benchmark_for, etc_run, EtcParams, NoiseModel, StochasticEnv};
use recharge_core::harness::sweeps::{self, CheckReport, VerifyPlan};
use recharge_core::harness::{
    gamma, hash_json, mean_and_std_err, run_experiment, write_csv, write_outputs, Algorithm, ExperimentConfig,
    InstanceSource, SeedSpec,
};
use recharge_core::instances::{generate, GeneratorKind, Instance};
use recharge_core::lp::{self, DelayProfile, LpSolution};
use recharge_core::oracle::{dp_opt_curve, DEFAULT_BUDGET};
use recharge_core::scheduler::Planner;

const OUT_DIR_ENV: &str = "RECHARGE_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "recharge", version, about = "Bandits with recharging payoffs")]
struct Cli {
    /// Output directory [default: $RECHARGE_OUT_DIR or ./recharge-out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Generate a random instance.
    Gen(GenArgs),
    /// Solve the LP relaxation and extract the delay profile.
    SolveLp(InstanceArgs),
    /// Run the planner on known payoffs and trace every round.
    Plan(PlanArgs),
    /// Seeded replications of rti, greedy and etc.
    Simulate(SimulateArgs),
    /// Run explore-then-commit and record the regret ledger.
    Learn(LearnArgs),
    /// Oracle sweeps (correlation gap, closure, coupling, marginals), or the
    /// exact optimum curve of one instance when --instance is given.
    Oracle(OracleArgs),
    /// Run every verification sweep; exits 1 if any check fails.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Serialize)]
struct GenArgs {
    /// heaviside, concave or random-monotone
    #[arg(long, default_value = "heaviside")]
    kind: GeneratorKind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    tau_max: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct InstanceArgs {
    #[arg(long)]
    instance: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct PlanArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    horizon: usize,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// JSON experiment config; replaces every other flag.
    #[arg(long, conflicts_with_all = ["instance", "algorithms"])]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    instance: Option<PathBuf>,
    /// Comma-separated subset of rti, greedy, etc.
    #[arg(long, default_value = "rti,greedy")]
    algorithms: String,
    #[arg(long, default_value_t = 1000)]
    horizon: usize,
    /// `a..b` (half-open), a comma list, or a single seed.
    #[arg(long, default_value = "0..10")]
    seeds: String,
    #[arg(long, default_value = "bernoulli")]
    noise: NoiseModel,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct LearnArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    horizon: usize,
    /// none, bernoulli, uniform or uniform:<half-width>
    #[arg(long, default_value = "bernoulli")]
    noise: NoiseModel,
    /// `a..b` (half-open), a comma list, or a single seed.
    #[arg(long, default_value = "0")]
    seeds: String,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct OracleArgs {
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    horizon: usize,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    /// Divide every trial count by this factor.
    #[arg(long, default_value_t = 1)]
    scale_down: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Status {
    Ok,
    VerificationFailed,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::VerificationFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<Status> {
    let out = output_dir(cli.out);
    fs::create_dir_all(&out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    write_manifest(&out, &cli.command)?;
    match &cli.command {
        Command::Gen(a) => gen(a, &out),
        Command::SolveLp(a) => solve_lp(a, &out),
        Command::Plan(a) => plan(a, &out),
        Command::Simulate(a) => simulate(a, &out),
        Command::Learn(a) => learn(a, &out),
        Command::Oracle(a) => oracle(a, &out),
        Command::Verify(a) => verify(a, &out),
    }
}

fn output_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("recharge-out"))
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a Command,
    args_hash: String,
    version: &'static str,
}

fn write_manifest(out: &Path, command: &Command) -> Result<()> {
    let manifest = Manifest {
        command,
        args_hash: hash_json(command),
        version: env!("CARGO_PKG_VERSION"),
    };
    write_json(&out.join("manifest.json"), &manifest)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load_instance(path: &Path) -> Result<Instance> {
    Instance::load(path).with_context(|| format!("cannot load instance {}", path.display()))
}

fn parse_seeds(text: &str) -> Result<SeedSpec> {
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let base: u64 = a.trim().parse().with_context(|| format!("bad seed range {text:?}"))?;
        let end: u64 = b.trim().parse().with_context(|| format!("bad seed range {text:?}"))?;
        if end <= base {
            bail!("seed range {text:?} is empty");
        }
        return Ok(SeedSpec::Range {
            base,
            count: end - base,
        });
    }
    let list = text
        .split(',')
        .map(|s| s.trim().parse::<u64>().with_context(|| format!("bad seed {s:?}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(SeedSpec::List(list))
}

fn gen(a: &GenArgs, out: &Path) -> Result<Status> {
    let instance = generate(a.kind, a.n, a.tau_max, a.k, a.seed)?;
    let path = out.join("instance.json");
    instance.save(&path)?;
    println!("wrote {}", path.display());
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct SolutionFile<'a> {
    #[serde(flatten)]
    solution: &'a LpSolution,
    profile: &'a DelayProfile,
}

fn solve_lp(a: &InstanceArgs, out: &Path) -> Result<Status> {
    let instance = load_instance(&a.instance)?;
    let (solution, profile) = lp::plan_profile(&instance)?;
    write_json(
        &out.join("solution.json"),
        &SolutionFile {
            solution: &solution,
            profile: &profile,
        },
    )?;
    println!("V* = {}", solution.value);
    for e in &solution.nonzeros {
        println!("x[{}, {}] = {}", e.arm, e.tau, e.x);
    }
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct TraceRow {
    t: usize,
    candidates: String,
    played: String,
    payoff: f64,
}

#[derive(Serialize)]
struct PlanSummary {
    seed: u64,
    horizon: usize,
    mean_payoff: f64,
    mean_payoff_after_burn_in: f64,
    v_star: f64,
    gamma: f64,
    gamma_v_star: f64,
}

fn join(items: &[usize]) -> String {
    items.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

fn plan(a: &PlanArgs, out: &Path) -> Result<Status> {
    if a.horizon == 0 {
        bail!("horizon must be positive");
    }
    let instance = load_instance(&a.instance)?;
    let planner = Planner::new(&instance)?;
    let trace = planner.run(&instance, a.seed, a.horizon)?;
    let rows: Vec<TraceRow> = trace
        .iter()
        .map(|r| TraceRow {
            t: r.t,
            candidates: join(&r.candidates),
            played: join(&r.played),
            payoff: r.payoff,
        })
        .collect();
    write_csv(&out.join("trace.csv"), &rows)?;
    let payoffs: Vec<f64> = trace.iter().map(|r| r.payoff).collect();
    let tail = &payoffs[instance.tau_max().min(payoffs.len()) - 1..];
    let g = gamma(instance.k());
    let summary = PlanSummary {
        seed: a.seed,
        horizon: a.horizon,
        mean_payoff: payoffs.iter().sum::<f64>() / payoffs.len() as f64,
        mean_payoff_after_burn_in: tail.iter().sum::<f64>() / tail.len() as f64,
        v_star: planner.value,
        gamma: g,
        gamma_v_star: g * planner.value,
    };
    write_csv(&out.join("summary.csv"), &[&summary])?;
    println!(
        "mean payoff {:.6} (after burn-in {:.6}); gamma_k * V* = {:.6}",
        summary.mean_payoff, summary.mean_payoff_after_burn_in, summary.gamma_v_star
    );
    Ok(Status::Ok)
}

fn simulate(a: &SimulateArgs, out: &Path) -> Result<Status> {
    let config = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .with_context(|| format!("invalid config {}", path.display()))?
        }
        None => ExperimentConfig {
            instance: InstanceSource::File {
                path: a.instance.clone().expect("clap requires --instance without --config"),
            },
            algorithms: a
                .algorithms
                .split(',')
                .map(|s| s.trim().parse::<Algorithm>())
                .collect::<Result<Vec<_>, _>>()?,
            horizon: a.horizon,
            seeds: parse_seeds(&a.seeds)?,
            noise: a.noise,
            epsilon: a.epsilon,
            delta: a.delta,
            budget: a.budget,
        },
    };
    let result = run_experiment(&config)?;
    write_outputs(&result, out)?;
    for row in &result.aggregate {
        println!(
            "{:<6} seeds={} mean={:.6} ± {:.6}  gamma_k*V*={:.6}",
            row.algorithm, row.seeds, row.mean_payoff, row.std_err, row.gamma_v_star
        );
    }
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct LearnSummary {
    seed: u64,
    horizon: usize,
    epsilon: f64,
    delta: f64,
    m: usize,
    exploration_rounds: usize,
    total_payoff: f64,
    benchmark: &'static str,
    /// True when regret is measured against `T·V*` and so overstates the truth.
    pessimistic: bool,
    regret: f64,
}

fn learn(a: &LearnArgs, out: &Path) -> Result<Status> {
    let instance = load_instance(&a.instance)?;
    let seeds = parse_seeds(&a.seeds)?.seeds();
    if seeds.is_empty() {
        bail!("seed list is empty");
    }
    let tuned = EtcParams::tuned(&instance, a.horizon);
    let params = EtcParams {
        epsilon: a.epsilon.unwrap_or(tuned.epsilon),
        delta: a.delta.unwrap_or(tuned.delta),
    };
    let bench = Arc::new(benchmark_for(&instance, a.horizon, a.budget)?);
    if bench.is_pessimistic() {
        log::warn!("DP benchmark exceeds the budget; regret is reported against T * V* (an upper bound)");
    }
    let mut summaries = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let mut env = StochasticEnv::new(instance.clone(), a.noise, seed);
        let outcome = etc_run(&mut env, a.horizon, params, seed, bench.clone())?;
        write_csv(&out.join(format!("ledger_seed{seed}.csv")), &outcome.ledger.rows())?;
        summaries.push(LearnSummary {
            seed,
            horizon: a.horizon,
            epsilon: params.epsilon,
            delta: params.delta,
            m: outcome.m,
            exploration_rounds: outcome.exploration_rounds,
            total_payoff: outcome.ledger.total(),
            benchmark: bench.label(),
            pessimistic: bench.is_pessimistic(),
            regret: outcome.ledger.regret(),
        });
    }
    write_csv(&out.join("summary.csv"), &summaries)?;
    let regrets: Vec<f64> = summaries.iter().map(|s| s.regret).collect();
    let (mean, se) = mean_and_std_err(&regrets);
    println!(
        "m = {}, exploration rounds = {}, mean regret {:.4} ± {:.4} over {} seed(s) [{}]",
        summaries[0].m,
        summaries[0].exploration_rounds,
        mean,
        se,
        seeds.len(),
        bench.label()
    );
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct CurveRow {
    t: usize,
    opt: f64,
    lp_bound: f64,
}

fn oracle(a: &OracleArgs, out: &Path) -> Result<Status> {
    if let Some(path) = &a.instance {
        let instance = load_instance(path)?;
        let solution = lp::solve_extreme(&lp::build_lp(&instance))?;
        let curve = dp_opt_curve(&instance, a.horizon, a.budget)?;
        let rows: Vec<CurveRow> = curve
            .iter()
            .enumerate()
            .map(|(t, &opt)| CurveRow {
                t,
                opt,
                lp_bound: t as f64 * solution.value,
            })
            .collect();
        write_csv(&out.join("opt_curve.csv"), &rows)?;
        println!(
            "opt({}) = {}, T * V* = {}",
            a.horizon,
            curve[a.horizon],
            a.horizon as f64 * solution.value
        );
        return Ok(Status::Ok);
    }
    let reports = vec![
        sweeps::correlation_gap(a.trials, a.seed),
        sweeps::closure_dominates_multilinear(a.trials, a.seed),
        sweeps::closure_linear_bound(a.trials, a.seed),
        sweeps::exclusive_coupling(a.trials, a.seed),
        sweeps::marginals(a.trials * 100, a.seed),
    ];
    report(&reports, &out.join("oracle.csv"))
}

#[derive(Serialize)]
struct ConstantRow {
    k: usize,
    gamma: f64,
}

fn verify(a: &VerifyArgs, out: &Path) -> Result<Status> {
    let constants: Vec<ConstantRow> = [1, 2, 3, 4, 5, 10]
        .into_iter()
        .map(|k| ConstantRow { k, gamma: gamma(k) })
        .collect();
    write_csv(&out.join("constants.csv"), &constants)?;
    let reports = sweeps::verify_all(VerifyPlan::default().scaled_down(a.scale_down), a.seed);
    report(&reports, &out.join("verify.csv"))
}

fn report(reports: &[CheckReport], path: &Path) -> Result<Status> {
    write_csv(path, reports)?;
    for r in reports {
        println!(
            "{} {:<30} trials={:<6} failures={:<4} worst_margin={:.3e}",
            if r.passed() { "PASS" } else { "FAIL" },
            r.check,
            r.trials,
            r.failures,
            r.worst_margin
        );
    }
    Ok(if reports.iter().all(CheckReport::passed) {
        Status::Ok
    } else {
        Status::VerificationFailed
    })
}
