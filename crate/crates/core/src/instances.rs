//! Problem instances: tabulated recharging payoff curves, instance
//! generators and the on-disk JSON format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("arm {arm}: payoff table is empty (recovery time must be at least 1)")]
    EmptyTable { arm: usize },
    #[error("arm {arm}: recovery_time {recovery_time} does not match {len} tabulated values")]
    LengthMismatch {
        arm: usize,
        recovery_time: usize,
        len: usize,
    },
    #[error("arm {arm}, delay {tau}: value {value} is outside [0, 1]")]
    OutOfRange { arm: usize, tau: usize, value: f64 },
    #[error("arm {arm}, delay {tau}: value {value} is below value {previous} at delay {}", tau - 1)]
    NonMonotone {
        arm: usize,
        tau: usize,
        value: f64,
        previous: f64,
    },
    #[error("play budget k = {k} must satisfy 1 <= k < n = {n}")]
    Budget { k: usize, n: usize },
    #[error("tau_max = {tau_max} is below the recovery time {recovery_time} of arm {arm}")]
    TauMax {
        tau_max: usize,
        arm: usize,
        recovery_time: usize,
    },
    #[error("header declares n = {declared} but the file lists {actual} arms")]
    ArmCount { declared: usize, actual: usize },
    #[error("invalid generator parameters: {0}")]
    Generator(String),
    #[error("malformed instance file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot access {path}")]
    Io { path: String, source: std::io::Error },
}

/// Mean payoff of one arm as a function of the delay since its last play.
///
/// `values[τ - 1]` holds the payoff at delay `τ` for `τ = 1..=recovery_time`;
/// any longer delay sits on the plateau `values[recovery_time - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffFunction {
    values: Vec<f64>,
}

impl PayoffFunction {
    pub fn new(values: Vec<f64>) -> Result<Self, InstanceError> {
        validate_table(0, &values)?;
        Ok(Self { values })
    }

    /// A constant payoff, available from delay 1 onwards.
    pub fn constant(p: f64) -> Result<Self, InstanceError> {
        Self::new(vec![p])
    }

    pub fn recovery_time(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Payoff at delay `tau` (1-indexed); delays past the recovery time
    /// return the plateau value.
    ///
    /// Panics on `tau == 0`: delays start at 1.
    pub fn evaluate(&self, tau: usize) -> f64 {
        assert!(tau >= 1, "delays are 1-indexed; tau = 0 is not a delay");
        self.values[tau.min(self.values.len()) - 1]
    }

    pub fn plateau(&self) -> f64 {
        *self.values.last().expect("non-empty by construction")
    }
}

fn validate_table(arm: usize, values: &[f64]) -> Result<(), InstanceError> {
    if values.is_empty() {
        return Err(InstanceError::EmptyTable { arm });
    }
    for (idx, &value) in values.iter().enumerate() {
        let tau = idx + 1;
        if !(0.0..=1.0).contains(&value) {
            return Err(InstanceError::OutOfRange { arm, tau, value });
        }
        if idx > 0 && value < values[idx - 1] {
            return Err(InstanceError::NonMonotone {
                arm,
                tau,
                value,
                previous: values[idx - 1],
            });
        }
    }
    Ok(())
}

/// `p · H(τ − d)`: zero below the threshold delay `d`, `p` from `d` on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeavisideSpec {
    pub baseline: f64,
    pub threshold: usize,
}

impl HeavisideSpec {
    pub fn new(baseline: f64, threshold: usize) -> Self {
        Self { baseline, threshold }
    }

    pub fn expand(&self) -> Result<PayoffFunction, InstanceError> {
        if self.threshold == 0 {
            return Err(InstanceError::EmptyTable { arm: 0 });
        }
        let mut values = vec![0.0; self.threshold];
        values[self.threshold - 1] = self.baseline;
        PayoffFunction::new(values)
    }
}

/// An immutable k-RB planning instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    arms: Vec<PayoffFunction>,
    k: usize,
    tau_max: usize,
}

impl Instance {
    pub fn new(arms: Vec<PayoffFunction>, k: usize, tau_max: usize) -> Result<Self, InstanceError> {
        let n = arms.len();
        if k == 0 || k >= n {
            return Err(InstanceError::Budget { k, n });
        }
        for (arm, f) in arms.iter().enumerate() {
            if f.recovery_time() > tau_max {
                return Err(InstanceError::TauMax {
                    tau_max,
                    arm,
                    recovery_time: f.recovery_time(),
                });
            }
        }
        Ok(Self { arms, k, tau_max })
    }

    /// Builds an instance whose `tau_max` is the largest recovery time.
    pub fn with_tight_bound(arms: Vec<PayoffFunction>, k: usize) -> Result<Self, InstanceError> {
        let tau_max = arms.iter().map(PayoffFunction::recovery_time).max().unwrap_or(1);
        Self::new(arms, k, tau_max)
    }

    pub fn n(&self) -> usize {
        self.arms.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tau_max(&self) -> usize {
        self.tau_max
    }

    pub fn arms(&self) -> &[PayoffFunction] {
        &self.arms
    }

    pub fn arm(&self, i: usize) -> &PayoffFunction {
        &self.arms[i]
    }

    /// Mean payoff of arm `i` at delay `tau`.
    pub fn payoff(&self, i: usize, tau: usize) -> f64 {
        self.arms[i].evaluate(tau)
    }

    /// Raw payoff tables, one per arm (the LP's objective coefficients).
    pub fn tables(&self) -> Vec<Vec<f64>> {
        self.arms.iter().map(|f| f.values.clone()).collect()
    }

    pub fn to_json(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{{");
        let _ = writeln!(out, "  \"n\": {},", self.n());
        let _ = writeln!(out, "  \"k\": {},", self.k);
        let _ = writeln!(out, "  \"tau_max\": {},", self.tau_max);
        let _ = writeln!(out, "  \"arms\": [");
        for (idx, arm) in self.arms.iter().enumerate() {
            let values: Vec<String> = arm.values.iter().map(|&v| format_decimal(v)).collect();
            let sep = if idx + 1 == self.arms.len() { "" } else { "," };
            let _ = writeln!(
                out,
                "    {{ \"recovery_time\": {}, \"values\": [{}] }}{}",
                arm.recovery_time(),
                values.join(", "),
                sep
            );
        }
        let _ = writeln!(out, "  ]");
        out.push('}');
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        file.into_instance()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), InstanceError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| InstanceError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| InstanceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Positional decimal with 17 significant digits, which round-trips any f64
/// in `[0, 1]` exactly.
fn format_decimal(v: f64) -> String {
    if v == 0.0 {
        return "0.0".to_string();
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (16 - exponent).max(1) as usize;
    format!("{v:.decimals$}")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n: usize,
    k: usize,
    tau_max: usize,
    arms: Vec<ArmRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArmRecord {
    recovery_time: usize,
    values: Vec<f64>,
}

impl InstanceFile {
    fn into_instance(self) -> Result<Instance, InstanceError> {
        if self.n != self.arms.len() {
            return Err(InstanceError::ArmCount {
                declared: self.n,
                actual: self.arms.len(),
            });
        }
        let mut arms = Vec::with_capacity(self.arms.len());
        for (arm, record) in self.arms.into_iter().enumerate() {
            if record.recovery_time != record.values.len() {
                return Err(InstanceError::LengthMismatch {
                    arm,
                    recovery_time: record.recovery_time,
                    len: record.values.len(),
                });
            }
            validate_table(arm, &record.values)?;
            arms.push(PayoffFunction { values: record.values });
        }
        Instance::new(arms, self.k, self.tau_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Heaviside,
    Concave,
    RandomMonotone,
}

impl FromStr for GeneratorKind {
    type Err = InstanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "heaviside" => Ok(Self::Heaviside),
            "concave" => Ok(Self::Concave),
            "random-monotone" => Ok(Self::RandomMonotone),
            other => Err(InstanceError::Generator(format!(
                "unknown generator kind {other:?} (expected heaviside, concave or random-monotone)"
            ))),
        }
    }
}

impl std::fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Heaviside => "heaviside",
            Self::Concave => "concave",
            Self::RandomMonotone => "random-monotone",
        })
    }
}

/// Draws a random instance. Each arm gets its own RNG sub-stream, so the
/// output is a pure function of the arguments.
///
/// - `heaviside`: baseline `p ~ U[0,1)`, threshold `d ~ U{1..tau_max}`.
/// - `concave`: recovery time `r ~ U{1..tau_max}`, plateau `p ~ U[0,1)`,
///   `r` increments drawn uniformly, sorted non-increasing and scaled to sum to `p`.
/// - `random-monotone`: `r ~ U{1..tau_max}` and `r` i.i.d. uniforms sorted non-decreasing.
pub fn generate(kind: GeneratorKind, n: usize, tau_max: usize, k: usize, seed: u64) -> Result<Instance, InstanceError> {
    if n < 2 {
        return Err(InstanceError::Generator(format!("need n >= 2 arms, got {n}")));
    }
    if tau_max == 0 {
        return Err(InstanceError::Generator("tau_max must be at least 1".into()));
    }
    if k == 0 || k >= n {
        return Err(InstanceError::Budget { k, n });
    }
    let arms = (0..n)
        .map(|arm| {
            let mut rng = rng::stream(seed, rng::GENERATOR_STREAM_BASE + arm as u64);
            let recovery = rng.gen_range(1..=tau_max);
            let values = match kind {
                GeneratorKind::Heaviside => {
                    let baseline: f64 = rng.gen();
                    let mut v = vec![0.0; recovery];
                    v[recovery - 1] = baseline;
                    v
                }
                GeneratorKind::Concave => {
                    let plateau: f64 = rng.gen();
                    let mut increments: Vec<f64> = (0..recovery).map(|_| rng.gen::<f64>()).collect();
                    increments.sort_by(|a, b| b.total_cmp(a));
                    let total: f64 = increments.iter().sum();
                    let scale = if total > 0.0 { plateau / total } else { 0.0 };
                    let mut acc = 0.0;
                    increments
                        .iter()
                        .map(|inc| {
                            acc += inc * scale;
                            acc.min(1.0)
                        })
                        .collect()
                }
                GeneratorKind::RandomMonotone => {
                    let mut v: Vec<f64> = (0..recovery).map(|_| rng.gen::<f64>()).collect();
                    v.sort_by(f64::total_cmp);
                    v
                }
            };
            PayoffFunction::new(values).map_err(|e| match e {
                InstanceError::OutOfRange { tau, value, .. } => InstanceError::OutOfRange { arm, tau, value },
                InstanceError::NonMonotone {
                    tau, value, previous, ..
                } => InstanceError::NonMonotone {
                    arm,
                    tau,
                    value,
                    previous,
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Instance::new(arms, k, tau_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heaviside_pair() -> Instance {
        let a = HeavisideSpec::new(1.0, 2).expand().unwrap();
        let b = PayoffFunction::constant(0.6).unwrap();
        Instance::new(vec![a, b], 1, 2).unwrap()
    }

    #[test]
    fn heaviside_evaluation() {
        let f = HeavisideSpec::new(1.0, 2).expand().unwrap();
        assert_eq!(f.evaluate(1), 0.0);
        assert_eq!(f.evaluate(2), 1.0);
        assert_eq!(f.evaluate(7), 1.0);
        assert_eq!(f.recovery_time(), 2);
    }

    #[test]
    fn table_lookup() {
        let f = PayoffFunction::new(vec![0.2, 0.5, 0.5]).unwrap();
        assert_eq!(f.evaluate(2), 0.5);
        assert_eq!(f.evaluate(1), 0.2);
        assert_eq!(f.evaluate(100), 0.5);
    }

    #[test]
    #[should_panic(expected = "1-indexed")]
    fn zero_delay_is_a_contract_violation() {
        PayoffFunction::constant(0.3).unwrap().evaluate(0);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(GeneratorKind::Heaviside, 2, 2, 1, 7).unwrap();
        let b = generate(GeneratorKind::Heaviside, 2, 2, 1, 7).unwrap();
        assert_eq!(a, b);
        let c = generate(GeneratorKind::Heaviside, 2, 2, 1, 8).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn random_monotone_tables_are_sorted() {
        let inst = generate(GeneratorKind::RandomMonotone, 5, 4, 2, 1).unwrap();
        for arm in inst.arms() {
            assert!(arm.values().windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn concave_increments_do_not_increase() {
        let inst = generate(GeneratorKind::Concave, 3, 8, 1, 3).unwrap();
        for arm in inst.arms() {
            let v = arm.values();
            let incs: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
            for w in incs.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "increments {incs:?}");
            }
            assert!(v[0] >= incs.first().copied().unwrap_or(0.0) - 1e-12);
        }
    }

    #[test]
    fn generator_rejects_full_budget() {
        assert!(matches!(
            generate(GeneratorKind::Heaviside, 3, 2, 3, 0),
            Err(InstanceError::Budget { k: 3, n: 3 })
        ));
    }

    #[test]
    fn json_round_trip() {
        let inst = heaviside_pair();
        let back = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        let inst = generate(GeneratorKind::Concave, 4, 5, 2, 11).unwrap();
        inst.save(&path).unwrap();
        assert_eq!(Instance::load(&path).unwrap(), inst);
    }

    #[test]
    fn values_carry_seventeen_digits() {
        assert_eq!(format_decimal(0.5), "0.50000000000000000");
        assert_eq!(format_decimal(1.0), "1.0000000000000000");
        assert_eq!(format_decimal(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(format_decimal(0.0), "0.0");
    }

    #[test]
    fn non_monotone_file_names_delay() {
        let text = r#"{"n": 2, "k": 1, "tau_max": 2,
            "arms": [{"recovery_time": 2, "values": [0.5, 0.4]},
                     {"recovery_time": 1, "values": [0.3]}]}"#;
        let err = Instance::from_json(text).unwrap_err();
        assert!(
            matches!(err, InstanceError::NonMonotone { arm: 0, tau: 2, .. }),
            "{err}"
        );
        assert!(err.to_string().contains("delay 2"));
    }

    #[test]
    fn out_of_range_value_is_rejected() {
        let text = r#"{"n": 2, "k": 1, "tau_max": 1,
            "arms": [{"recovery_time": 1, "values": [0.5]},
                     {"recovery_time": 1, "values": [1.5]}]}"#;
        assert!(matches!(
            Instance::from_json(text),
            Err(InstanceError::OutOfRange { arm: 1, tau: 1, .. })
        ));
    }

    #[test]
    fn budget_equal_to_arm_count_is_rejected() {
        let text = r#"{"n": 2, "k": 2, "tau_max": 1,
            "arms": [{"recovery_time": 1, "values": [0.5]},
                     {"recovery_time": 1, "values": [0.5]}]}"#;
        assert!(matches!(
            Instance::from_json(text),
            Err(InstanceError::Budget { k: 2, n: 2 })
        ));
    }

    #[test]
    fn malformed_files_are_parse_errors() {
        assert!(matches!(Instance::from_json("{\"n\": 2"), Err(InstanceError::Parse(_))));
        let text = r#"{"n": 3, "k": 1, "tau_max": 1,
            "arms": [{"recovery_time": 1, "values": [0.5]},
                     {"recovery_time": 1, "values": [0.5]}]}"#;
        assert!(matches!(Instance::from_json(text), Err(InstanceError::ArmCount { .. })));
    }

    #[test]
    fn tau_max_must_cover_recovery_times() {
        let f = HeavisideSpec::new(0.4, 3).expand().unwrap();
        let g = PayoffFunction::constant(0.1).unwrap();
        assert!(matches!(
            Instance::new(vec![f, g], 1, 2),
            Err(InstanceError::TauMax { arm: 0, .. })
        ));
    }
}
