//! Exact oracles for the weighted rank function of the rank-k uniform matroid
//! and its two continuous extensions.

use rand::Rng;
use serde::Serialize;

use super::OracleError;
use crate::harness::gamma;
use crate::lp::{LinearProgram, RowKind};

/// Largest ground set for 2^n enumeration of the multilinear extension.
pub const MULTILINEAR_LIMIT: usize = 20;
/// Largest ground set for the concave-closure LP (2^n columns).
pub const CLOSURE_LIMIT: usize = 12;
pub const ORACLE_TOL: f64 = 1e-9;

/// `f(S) = max { w(I) : I ⊆ S, |I| <= k }`, i.e. the sum of the `k` largest
/// weights in `S`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedRank {
    weights: Vec<f64>,
    k: usize,
    /// Indices by decreasing weight (ties by index).
    order: Vec<usize>,
}

impl WeightedRank {
    pub fn new(weights: Vec<f64>, k: usize) -> Result<Self, OracleError> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(OracleError::InvalidInput(
                "weights must be finite and nonnegative".into(),
            ));
        }
        if weights.len() > 63 {
            return Err(OracleError::TooLarge {
                what: "weighted rank bitmask",
                n: weights.len(),
                limit: 63,
            });
        }
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
        Ok(Self { weights, k, order })
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Value on the set encoded by `mask` (bit `i` = element `i`).
    pub fn value_mask(&self, mask: u64) -> f64 {
        self.order
            .iter()
            .filter(|&&i| mask >> i & 1 == 1)
            .take(self.k)
            .map(|&i| self.weights[i])
            .sum()
    }

    pub fn value(&self, set: &[usize]) -> f64 {
        self.value_mask(set.iter().fold(0u64, |m, &i| m | 1 << i))
    }
}

/// `f_{w,k}(S)` for an explicit member list.
pub fn weighted_rank(weights: &[f64], k: usize, set: &[usize]) -> f64 {
    let mut chosen: Vec<f64> = set.iter().map(|&i| weights[i]).collect();
    chosen.sort_by(|a, b| b.total_cmp(a));
    chosen.iter().take(k).sum()
}

fn check_marginals(y: &[f64], n: usize) -> Result<(), OracleError> {
    if y.len() != n {
        return Err(OracleError::InvalidInput(format!(
            "{} marginals for {n} elements",
            y.len()
        )));
    }
    if y.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(OracleError::InvalidInput("marginals must lie in [0, 1]".into()));
    }
    Ok(())
}

/// Probability of `mask` under independent inclusion with marginals `y`,
/// restricted to the elements in `universe`.
fn product_weight(y: &[f64], universe: &[usize], mask: u64) -> f64 {
    universe
        .iter()
        .map(|&i| if mask >> i & 1 == 1 { y[i] } else { 1.0 - y[i] })
        .product()
}

/// Calls `visit(mask)` for every subset of `universe`.
fn for_each_subset(universe: &[usize], mut visit: impl FnMut(u64)) {
    let m = universe.len();
    for bits in 0u64..(1 << m) {
        let mask = universe
            .iter()
            .enumerate()
            .filter(|(j, _)| bits >> j & 1 == 1)
            .fold(0u64, |acc, (_, &i)| acc | 1 << i);
        visit(mask);
    }
}

/// `F(y) = E_{S ~ I(y)}[f(S)]` by enumerating all `2^n` subsets.
pub fn multilinear_exact(f: &WeightedRank, y: &[f64]) -> Result<f64, OracleError> {
    let n = f.n();
    if n > MULTILINEAR_LIMIT {
        return Err(OracleError::TooLarge {
            what: "multilinear enumeration",
            n,
            limit: MULTILINEAR_LIMIT,
        });
    }
    check_marginals(y, n)?;
    let universe: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    for_each_subset(&universe, |mask| {
        let p = product_weight(y, &universe, mask);
        if p > 0.0 {
            total += p * f.value_mask(mask);
        }
    });
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

/// Monte Carlo estimate of `F(y)` for ground sets too large to enumerate.
pub fn multilinear_monte_carlo(
    f: &WeightedRank,
    y: &[f64],
    samples: usize,
    rng: &mut impl Rng,
) -> Result<Estimate, OracleError> {
    check_marginals(y, f.n())?;
    if samples < 2 {
        return Err(OracleError::InvalidInput("need at least two samples".into()));
    }
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let mask = y
            .iter()
            .enumerate()
            .filter(|(_, &p)| rng.gen::<f64>() < p)
            .fold(0u64, |acc, (i, _)| acc | 1 << i);
        let v = f.value_mask(mask);
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(Estimate {
        mean,
        std_err: (var / n).sqrt(),
        samples,
    })
}

/// `f⁺(y)`: the best expectation of `f` over all distributions on subsets
/// with marginals `y`, solved as an LP over the `2^n` subset weights.
pub fn concave_closure_exact(f: &WeightedRank, y: &[f64]) -> Result<f64, OracleError> {
    let n = f.n();
    if n > CLOSURE_LIMIT {
        return Err(OracleError::TooLarge {
            what: "concave closure LP",
            n,
            limit: CLOSURE_LIMIT,
        });
    }
    check_marginals(y, n)?;
    let masks: Vec<u64> = (0u64..(1 << n)).collect();
    let mut lp = LinearProgram::new(masks.iter().map(|&m| f.value_mask(m)).collect());
    for (i, &yi) in y.iter().enumerate() {
        let coeffs = masks.iter().map(|&m| (m >> i & 1) as f64).collect();
        lp.push_row(coeffs, RowKind::Eq, yi);
    }
    lp.push_row(vec![1.0; masks.len()], RowKind::Eq, 1.0);
    lp.solve().map(|s| s.value).map_err(|e| OracleError::Lp(e.to_string()))
}

/// Correlation-gap comparison at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub multilinear: f64,
    pub closure: f64,
    /// `F / f⁺` (1 when both vanish).
    pub ratio: f64,
    pub gamma: f64,
    /// `F − γ_k f⁺`; negative beyond tolerance is a violation.
    pub margin: f64,
    pub holds: bool,
    pub weights: Vec<f64>,
    pub k: usize,
    pub y: Vec<f64>,
}

/// Checks `F(y) >= γ_k · f⁺(y)` with both sides computed exactly.
pub fn correlation_gap_check(f: &WeightedRank, y: &[f64]) -> Result<GapReport, OracleError> {
    let multilinear = multilinear_exact(f, y)?;
    let closure = concave_closure_exact(f, y)?;
    let g = gamma(f.k().max(1));
    let margin = multilinear - g * closure;
    let ratio = if closure > ORACLE_TOL {
        multilinear / closure
    } else {
        1.0
    };
    Ok(GapReport {
        multilinear,
        closure,
        ratio,
        gamma: g,
        margin,
        holds: margin >= -ORACLE_TOL,
        weights: f.weights().to_vec(),
        k: f.k(),
        y: y.to_vec(),
    })
}

/// Mutually exclusive versus independent inclusion of two elements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingReport {
    /// `E_{D(y)}[f]` with `a` and `b` never present together.
    pub exclusive: f64,
    /// `E_{I(y)}[f]`, everything independent.
    pub independent: f64,
    pub gap: f64,
    pub holds: bool,
}

/// Compares the coupling where `a` and `b` are mutually exclusive (other
/// elements independent) against fully independent inclusion.
///
/// The exclusive side is `E_{S'}[(1 − y_a − y_b) f(S') + y_a f(S' + a) + y_b f(S' + b)]`
/// over independent `S'` on the remaining elements.
pub fn exclusive_coupling_check(
    f: &WeightedRank,
    y: &[f64],
    a: usize,
    b: usize,
) -> Result<CouplingReport, OracleError> {
    let n = f.n();
    if n > MULTILINEAR_LIMIT {
        return Err(OracleError::TooLarge {
            what: "exclusive coupling enumeration",
            n,
            limit: MULTILINEAR_LIMIT,
        });
    }
    check_marginals(y, n)?;
    if a == b || a >= n || b >= n {
        return Err(OracleError::InvalidInput(format!(
            "need two distinct elements, got {a} and {b}"
        )));
    }
    let none = 1.0 - y[a] - y[b];
    if none < -ORACLE_TOL {
        return Err(OracleError::InvalidInput(format!(
            "y[{a}] + y[{b}] = {} exceeds 1",
            y[a] + y[b]
        )));
    }
    let none = none.max(0.0);
    let rest: Vec<usize> = (0..n).filter(|&i| i != a && i != b).collect();
    let mut exclusive = 0.0;
    for_each_subset(&rest, |mask| {
        let p = product_weight(y, &rest, mask);
        if p > 0.0 {
            exclusive += p
                * (none * f.value_mask(mask) + y[a] * f.value_mask(mask | 1 << a) + y[b] * f.value_mask(mask | 1 << b));
        }
    });
    let independent = multilinear_exact(f, y)?;
    let gap = exclusive - independent;
    Ok(CouplingReport {
        exclusive,
        independent,
        gap,
        holds: gap >= -ORACLE_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair() -> WeightedRank {
        WeightedRank::new(vec![1.0, 1.0], 1).unwrap()
    }

    #[test]
    fn rank_values() {
        assert_eq!(weighted_rank(&[0.3, 0.7], 1, &[0, 1]), 0.7);
        assert_eq!(weighted_rank(&[0.3, 0.7], 1, &[]), 0.0);
        assert!((weighted_rank(&[0.5, 0.4, 0.3], 2, &[0, 1, 2]) - 0.9).abs() < 1e-15);
        let f = WeightedRank::new(vec![0.5, 0.4, 0.3], 2).unwrap();
        assert!((f.value(&[0, 1, 2]) - 0.9).abs() < 1e-15);
        assert!((f.value(&[2]) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn multilinear_on_pair() {
        assert!((multilinear_exact(&pair(), &[0.5, 0.5]).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn multilinear_at_vertices() {
        let f = WeightedRank::new(vec![0.2, 0.9, 0.4], 2).unwrap();
        assert!((multilinear_exact(&f, &[1.0, 1.0, 1.0]).unwrap() - 1.3).abs() < 1e-15);
        assert_eq!(multilinear_exact(&f, &[0.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn closure_on_pair() {
        assert!((concave_closure_exact(&pair(), &[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gap_on_pair() {
        let report = correlation_gap_check(&pair(), &[0.5, 0.5]).unwrap();
        assert!(report.holds);
        assert!((report.ratio - 0.75).abs() < 1e-12);
    }

    #[test]
    fn one_hot_marginals_have_no_gap() {
        let f = WeightedRank::new(vec![0.3, 0.8, 0.5], 1).unwrap();
        let report = correlation_gap_check(&f, &[0.0, 1.0, 0.0]).unwrap();
        assert!((report.ratio - 1.0).abs() < 1e-12);
        assert!((report.multilinear - 0.8).abs() < 1e-12);
    }

    #[test]
    fn coupling_on_pair() {
        let report = exclusive_coupling_check(&pair(), &[0.5, 0.5], 0, 1).unwrap();
        assert!((report.exclusive - 1.0).abs() < 1e-15);
        assert!((report.independent - 0.75).abs() < 1e-15);
        assert!((report.gap - 0.25).abs() < 1e-15);
    }

    #[test]
    fn coupling_degenerates_without_a() {
        let f = WeightedRank::new(vec![0.3, 0.8, 0.5], 2).unwrap();
        let report = exclusive_coupling_check(&f, &[0.0, 0.6, 0.7], 0, 1).unwrap();
        assert!(report.gap.abs() < 1e-15);
    }

    #[test]
    fn coupling_rejects_oversubscribed_pair() {
        assert!(exclusive_coupling_check(&pair(), &[0.7, 0.6], 0, 1).is_err());
    }

    #[test]
    fn monte_carlo_brackets_exact() {
        let f = WeightedRank::new(vec![0.3, 0.8, 0.5, 0.1], 2).unwrap();
        let y = [0.4, 0.3, 0.9, 0.5];
        let exact = multilinear_exact(&f, &y).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est = multilinear_monte_carlo(&f, &y, 200_000, &mut rng).unwrap();
        assert!((est.mean - exact).abs() < 4.0 * est.std_err, "{est:?} vs {exact}");
    }

    #[test]
    fn size_limits_are_enforced() {
        let f = WeightedRank::new(vec![0.5; 13], 2).unwrap();
        assert!(matches!(
            concave_closure_exact(&f, &[0.5; 13]),
            Err(OracleError::TooLarge { .. })
        ));
        let g = WeightedRank::new(vec![0.5; 21], 2).unwrap();
        assert!(matches!(
            multilinear_exact(&g, &[0.5; 21]),
            Err(OracleError::TooLarge { .. })
        ));
    }
}
