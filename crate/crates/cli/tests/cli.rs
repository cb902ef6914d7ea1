use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn recharge(out: Option<&Path>, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_recharge"));
    if let Some(out) = out {
        cmd.arg("--out").arg(out);
    }
    cmd.args(args).output().unwrap()
}

fn pair_instance(dir: &Path) -> String {
    let path = dir.join("pair.json");
    fs::write(
        &path,
        r#"{"n": 2, "k": 1, "tau_max": 2, "arms": [{"recovery_time": 2, "values": [0.0, 1.0]}, {"recovery_time": 1, "values": [0.6]}]}"#,
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn missing_instance_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = recharge(Some(dir.path()), &["plan", "--instance", "/does/not/exist.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/does/not/exist.json"));
}

#[test]
fn unknown_noise_model_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let inst = pair_instance(dir.path());
    let out = recharge(Some(dir.path()), &["learn", "--instance", &inst, "--noise", "gaussian"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_monotone_instance_names_the_delay() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"n": 2, "k": 1, "tau_max": 2, "arms": [{"recovery_time": 2, "values": [0.5, 0.4]}, {"recovery_time": 1, "values": [0.6]}]}"#,
    )
    .unwrap();
    let out = recharge(Some(dir.path()), &["solve-lp", "--instance", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delay 2"));
}

#[test]
fn solve_lp_reports_value_and_profile() {
    let dir = tempfile::tempdir().unwrap();
    let inst = pair_instance(dir.path());
    let out = recharge(Some(dir.path()), &["solve-lp", "--instance", &inst]);
    assert!(out.status.success());
    let solution: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("solution.json")).unwrap()).unwrap();
    assert!((solution["value"].as_f64().unwrap() - 0.8).abs() < 1e-9);
    assert_eq!(solution["profile"]["irregular"]["arm"], 1);
    assert_eq!(solution["profile"]["regular"]["0"], 2);
}

#[test]
fn plan_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let inst = pair_instance(dir.path());
    let out = recharge(
        Some(dir.path()),
        &["plan", "--instance", &inst, "--horizon", "50", "--seed", "2"],
    );
    assert!(out.status.success());
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("t,candidates,played,payoff"));
    assert_eq!(trace.lines().count(), 51);
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.starts_with("seed,horizon,mean_payoff,mean_payoff_after_burn_in,v_star,gamma,gamma_v_star"));
}

#[test]
fn learn_writes_ledger_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let inst = pair_instance(dir.path());
    let out = recharge(
        Some(dir.path()),
        &["learn", "--instance", &inst, "--horizon", "2000", "--seeds", "3,5"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for seed in [3, 5] {
        let ledger = fs::read_to_string(dir.path().join(format!("ledger_seed{seed}.csv"))).unwrap();
        assert_eq!(ledger.lines().next(), Some("t,realized,cumulative,benchmark,regret"));
        assert_eq!(ledger.lines().count(), 2001);
    }
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn out_dir_defaults_to_environment_variable() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_recharge"))
        .env("RECHARGE_OUT_DIR", dir.path())
        .args(["gen", "--n", "3", "--tau-max", "2"])
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(dir.path().join("instance.json").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn verify_passes_when_scaled_down() {
    let dir = tempfile::tempdir().unwrap();
    let out = recharge(Some(dir.path()), &["verify", "--scale-down", "50"]);
    assert_eq!(out.status.code(), Some(0));
    let report = fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    assert!(report.starts_with("check,trials,failures,worst_margin"));
    let constants = fs::read_to_string(dir.path().join("constants.csv")).unwrap();
    assert_eq!(constants.lines().count(), 7);
}
