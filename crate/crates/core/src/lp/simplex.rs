//! Dense two-phase primal simplex.
//!
//! Solves `max c·x  s.t.  A x (<= | =) b,  x >= 0` with `b >= 0` and returns a
//! basic feasible solution together with its basis. Pricing is Dantzig's
//! largest-coefficient rule until a run of degenerate pivots trips the
//! counter, after which Bland's rule takes over and guarantees termination.
//!
//! The problems this crate feeds it are small (at most a few thousand
//! columns and a few dozen rows) and well scaled, so a dense tableau is the
//! simplest correct choice.

use thiserror::Error;

/// Pivot and ratio-test threshold.
const PIVOT_EPS: f64 = 1e-12;
/// Reduced-cost threshold for optimality.
const COST_EPS: f64 = 1e-11;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERACY_TRIP: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("pivot limit of {limit} exceeded (cycling guard)")]
    PivotLimit { limit: usize },
    #[error("LP is infeasible (phase-one residual {residual:e})")]
    Infeasible { residual: f64 },
    #[error("LP is unbounded along column {column}")]
    Unbounded { column: usize },
    #[error("malformed LP: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub kind: RowKind,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

/// Identity of a basic column in the final tableau.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasicVar {
    Structural(usize),
    /// Slack of the given row (only `Le` rows have one).
    Slack(usize),
    /// Artificial of a redundant `Eq` row, pinned at zero.
    Artificial(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasicSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// `basis[r]` is the basic column of row `r`.
    pub basis: Vec<BasicVar>,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn push_row(&mut self, coeffs: Vec<f64>, kind: RowKind, rhs: f64) {
        self.rows.push(Row { coeffs, kind, rhs });
    }

    pub fn solve(&self) -> Result<BasicSolution, SolverError> {
        Tableau::build(self)?.run()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Column {
    Structural(usize),
    Slack(usize),
    Artificial(usize),
}

struct Tableau {
    /// `rows × (cols + 1)`, last entry of each row is the rhs.
    cells: Vec<f64>,
    rows: usize,
    cols: usize,
    columns: Vec<Column>,
    basis: Vec<usize>,
    objective: Vec<f64>,
    num_structural: usize,
    pivots: usize,
    pivot_limit: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Result<Self, SolverError> {
        let n = lp.num_vars();
        let m = lp.rows.len();
        for (r, row) in lp.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(SolverError::Malformed(format!(
                    "row {r} has {} coefficients, expected {n}",
                    row.coeffs.len()
                )));
            }
            if !row.rhs.is_finite() || row.rhs < 0.0 {
                return Err(SolverError::Malformed(format!("row {r} has rhs {} < 0", row.rhs)));
            }
        }
        if lp.objective.iter().any(|c| !c.is_finite()) {
            return Err(SolverError::Malformed("non-finite objective coefficient".into()));
        }

        let mut columns: Vec<Column> = (0..n).map(Column::Structural).collect();
        let mut basis = vec![usize::MAX; m];
        for (r, row) in lp.rows.iter().enumerate() {
            basis[r] = columns.len();
            columns.push(match row.kind {
                RowKind::Le => Column::Slack(r),
                RowKind::Eq => Column::Artificial(r),
            });
        }
        let cols = columns.len();
        let width = cols + 1;
        let mut cells = vec![0.0; m * width];
        for (r, row) in lp.rows.iter().enumerate() {
            cells[r * width..r * width + n].copy_from_slice(&row.coeffs);
            cells[r * width + basis[r]] = 1.0;
            cells[r * width + cols] = row.rhs;
        }
        let mut objective = vec![0.0; cols];
        objective[..n].copy_from_slice(&lp.objective);
        Ok(Self {
            cells,
            rows: m,
            cols,
            columns,
            basis,
            objective,
            num_structural: n,
            pivots: 0,
            pivot_limit: 50 * (m + cols) + 1000,
        })
    }

    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.cells[r * self.width() + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn is_artificial(&self, c: usize) -> bool {
        matches!(self.columns[c], Column::Artificial(_))
    }

    fn run(mut self) -> Result<BasicSolution, SolverError> {
        if self.columns.iter().any(|c| matches!(c, Column::Artificial(_))) {
            let phase_one: Vec<f64> = (0..self.cols)
                .map(|c| if self.is_artificial(c) { -1.0 } else { 0.0 })
                .collect();
            self.optimize(&phase_one, true)?;
            let residual: f64 = (0..self.rows)
                .filter(|&r| self.is_artificial(self.basis[r]))
                .map(|r| self.rhs(r))
                .sum();
            if residual > 1e-9 {
                return Err(SolverError::Infeasible { residual });
            }
            self.drive_out_artificials();
        }
        let objective = self.objective.clone();
        self.optimize(&objective, false)?;
        Ok(self.extract())
    }

    /// Runs primal simplex on `cost` from the current basis.
    fn optimize(&mut self, cost: &[f64], allow_artificial: bool) -> Result<(), SolverError> {
        let mut degenerate_run = 0usize;
        loop {
            let reduced = self.reduced_costs(cost);
            let use_bland = degenerate_run >= DEGENERACY_TRIP;
            let entering = (0..self.cols)
                .filter(|&c| allow_artificial || !self.is_artificial(c))
                .filter(|&c| reduced[c] > COST_EPS)
                .fold(None, |best: Option<usize>, c| match best {
                    None => Some(c),
                    Some(_) if use_bland => best,
                    Some(b) if reduced[c] > reduced[b] => Some(c),
                    Some(b) => Some(b),
                });
            let Some(entering) = entering else {
                return Ok(());
            };
            let leaving = self.ratio_test(entering, use_bland)?;
            if self.rhs(leaving).abs() <= PIVOT_EPS {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(leaving, entering)?;
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut reduced = cost.to_vec();
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.cells[r * self.width()..r * self.width() + self.cols];
            for (red, a) in reduced.iter_mut().zip(row) {
                *red -= cb * a;
            }
        }
        for &b in &self.basis {
            reduced[b] = 0.0;
        }
        reduced
    }

    fn ratio_test(&self, entering: usize, use_bland: bool) -> Result<usize, SolverError> {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.rows {
            let a = self.at(r, entering);
            if a <= PIVOT_EPS {
                continue;
            }
            let ratio = self.rhs(r) / a;
            best = match best {
                None => Some((r, ratio)),
                Some((br, bratio)) => {
                    let tie = (ratio - bratio).abs() <= 1e-12 * (1.0 + bratio.abs());
                    if ratio < bratio && !tie {
                        Some((r, ratio))
                    } else if tie {
                        // Bland: smallest basic column index; otherwise the larger pivot.
                        let better = if use_bland {
                            self.basis[r] < self.basis[br]
                        } else {
                            a > self.at(br, entering)
                        };
                        if better {
                            Some((r, ratio))
                        } else {
                            Some((br, bratio))
                        }
                    } else {
                        Some((br, bratio))
                    }
                }
            };
        }
        best.map(|(r, _)| r).ok_or(SolverError::Unbounded { column: entering })
    }

    fn pivot(&mut self, leaving: usize, entering: usize) -> Result<(), SolverError> {
        self.pivots += 1;
        if self.pivots > self.pivot_limit {
            return Err(SolverError::PivotLimit {
                limit: self.pivot_limit,
            });
        }
        let width = self.width();
        let pivot = self.at(leaving, entering);
        let (start, end) = (leaving * width, leaving * width + width);
        for v in &mut self.cells[start..end] {
            *v /= pivot;
        }
        let pivot_row: Vec<f64> = self.cells[start..end].to_vec();
        for r in 0..self.rows {
            if r == leaving {
                continue;
            }
            let factor = self.at(r, entering);
            if factor == 0.0 {
                continue;
            }
            let row = &mut self.cells[r * width..r * width + width];
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v -= factor * p;
            }
            row[entering] = 0.0;
            if row[width - 1] < 0.0 && row[width - 1] > -1e-11 {
                row[width - 1] = 0.0;
            }
        }
        self.basis[leaving] = entering;
        Ok(())
    }

    /// Pivots zero-level artificials out of the basis where a non-artificial
    /// column is available; rows without one are redundant and keep the
    /// artificial pinned at zero.
    fn drive_out_artificials(&mut self) {
        for r in 0..self.rows {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            let replacement = (0..self.cols)
                .filter(|&c| !self.is_artificial(c) && !self.basis.contains(&c))
                .find(|&c| self.at(r, c).abs() > 1e-9);
            if let Some(c) = replacement {
                // Cannot trip the pivot limit here in practice; ignore the bookkeeping error.
                let _ = self.pivot(r, c);
            }
        }
    }

    fn extract(&self) -> BasicSolution {
        let mut x = vec![0.0; self.num_structural];
        let mut basis = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let col = self.basis[r];
            basis.push(match self.columns[col] {
                Column::Structural(j) => {
                    x[j] = self.rhs(r).max(0.0);
                    BasicVar::Structural(j)
                }
                Column::Slack(row) => BasicVar::Slack(row),
                Column::Artificial(row) => BasicVar::Artificial(row),
            });
        }
        let value = x.iter().zip(&self.objective).map(|(a, c)| a * c).sum();
        BasicSolution {
            x,
            value,
            basis,
            pivots: self.pivots,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximisation() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new(vec![3.0, 5.0]);
        lp.push_row(vec![1.0, 0.0], RowKind::Le, 4.0);
        lp.push_row(vec![0.0, 2.0], RowKind::Le, 12.0);
        lp.push_row(vec![3.0, 2.0], RowKind::Le, 18.0);
        let sol = lp.solve().unwrap();
        assert!((sol.value - 36.0).abs() < 1e-12);
        assert!((sol.x[0] - 2.0).abs() < 1e-12);
        assert!((sol.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn equality_rows_use_phase_one() {
        // max x + 2y s.t. x + y = 1 -> y = 1
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.push_row(vec![1.0, 1.0], RowKind::Eq, 1.0);
        let sol = lp.solve().unwrap();
        assert!((sol.value - 2.0).abs() < 1e-12);
        assert_eq!(sol.basis, vec![BasicVar::Structural(1)]);
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.push_row(vec![1.0, 1.0], RowKind::Eq, 1.0);
        lp.push_row(vec![2.0, 2.0], RowKind::Eq, 2.0);
        let sol = lp.solve().unwrap();
        assert!((sol.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_equalities_are_reported() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.push_row(vec![1.0], RowKind::Eq, 1.0);
        lp.push_row(vec![1.0], RowKind::Eq, 2.0);
        assert!(matches!(lp.solve(), Err(SolverError::Infeasible { .. })));
    }

    #[test]
    fn unbounded_is_reported() {
        let mut lp = LinearProgram::new(vec![1.0, 0.0]);
        lp.push_row(vec![0.0, 1.0], RowKind::Le, 1.0);
        assert!(matches!(lp.solve(), Err(SolverError::Unbounded { column: 0 })));
    }

    #[test]
    fn negative_rhs_is_malformed() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.push_row(vec![1.0], RowKind::Le, -1.0);
        assert!(matches!(lp.solve(), Err(SolverError::Malformed(_))));
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Highly degenerate: many constraints through the origin.
        let n = 6;
        let mut lp = LinearProgram::new(vec![1.0; n]);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let mut row = vec![0.0; n];
                    row[i] = 1.0;
                    row[j] = -1.0;
                    lp.push_row(row, RowKind::Le, 0.0);
                }
            }
        }
        lp.push_row(vec![1.0; n], RowKind::Le, 3.0);
        let sol = lp.solve().unwrap();
        assert!((sol.value - 3.0).abs() < 1e-9);
    }
}
