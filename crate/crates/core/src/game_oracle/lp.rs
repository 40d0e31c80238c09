//! Dense two-phase tableau simplex for small linear programs.
//!
//! Variables are non-negative unless marked free. Pricing uses the most
//! negative reduced cost and falls back to Bland's rule after a run of
//! degenerate pivots, which rules out cycling. Row duals are read off the
//! unit columns (slacks and artificials) that the tableau keeps to the end.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("linear program is infeasible (phase-one objective {phase_one_objective:e})")]
    Infeasible { phase_one_objective: f64 },
    #[error("linear program is unbounded (column {column} after {iterations} iterations)")]
    Unbounded { column: usize, iterations: usize },
    #[error("simplex iteration limit {limit} reached (objective {objective}, {degenerate} degenerate pivots)")]
    IterationLimit {
        limit: usize,
        objective: f64,
        degenerate: usize,
    },
    #[error("constraint {row} has {actual} coefficients, expected {expected}")]
    Shape { row: usize, expected: usize, actual: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
    pub pivot_tol: f64,
    pub optimality_tol: f64,
    pub feasibility_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200_000,
            bland_after: 50,
            pivot_tol: 1e-9,
            optimality_tol: 1e-11,
            feasibility_tol: 1e-9,
        }
    }
}

/// `min` or `max` of `c·x` subject to row constraints and `x ≥ 0` for
/// non-free variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    sense: Sense,
    objective: Vec<f64>,
    rows: Vec<Vec<f64>>,
    relations: Vec<Relation>,
    rhs: Vec<f64>,
    free: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One dual per constraint: the rate of change of the optimal objective
    /// in that constraint's right-hand side.
    pub duals: Vec<f64>,
    pub iterations: usize,
    /// Largest constraint or bound violation of `x`.
    pub primal_residual: f64,
    /// Largest dual-feasibility violation of `duals`.
    pub dual_residual: f64,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            rows: Vec::new(),
            relations: Vec::new(),
            rhs: Vec::new(),
            free: vec![false; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.rows.push(coeffs);
        self.relations.push(relation);
        self.rhs.push(rhs);
        self
    }

    pub fn free_variable(&mut self, j: usize) -> &mut Self {
        self.free[j] = true;
        self
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        self.solve_with(&SimplexOptions::default())
    }

    pub fn solve_with(&self, opts: &SimplexOptions) -> Result<LpSolution, LpError> {
        let n = self.num_vars();
        for (row, coeffs) in self.rows.iter().enumerate() {
            if coeffs.len() != n {
                return Err(LpError::Shape { row, expected: n, actual: coeffs.len() });
            }
        }
        let mut tab = Tableau::build(self);
        tab.phase_one(opts)?;
        tab.phase_two(opts)?;
        Ok(self.extract(&tab))
    }

    fn extract(&self, tab: &Tableau) -> LpSolution {
        let n = self.num_vars();
        let mut col_values = vec![0.0; tab.cols];
        for (i, &b) in tab.basis.iter().enumerate() {
            col_values[b] = tab.rhs(i);
        }
        let x: Vec<f64> = (0..n)
            .map(|j| {
                let plus = col_values[tab.var_cols[j].0];
                let minus = tab.var_cols[j].1.map_or(0.0, |c| col_values[c]);
                plus - minus
            })
            .collect();

        let flip = if self.sense == Sense::Maximize { -1.0 } else { 1.0 };
        let duals: Vec<f64> = (0..self.num_constraints())
            .map(|i| -tab.reduced_cost(tab.unit_col[i]) * tab.row_sign[i] * flip)
            .collect();
        let objective = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();

        LpSolution {
            primal_residual: self.primal_residual(&x),
            dual_residual: self.dual_residual(&duals),
            x,
            objective,
            duals,
            iterations: tab.iterations,
        }
    }

    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for (j, &v) in x.iter().enumerate() {
            if !self.free[j] {
                worst = worst.max(-v);
            }
        }
        for ((row, rel), &b) in self.rows.iter().zip(&self.relations).zip(&self.rhs) {
            let ax: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            let viol = match rel {
                Relation::Le => ax - b,
                Relation::Ge => b - ax,
                Relation::Eq => (ax - b).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Dual feasibility for the problem as posed (signs of the row duals and
    /// of the reduced costs).
    pub fn dual_residual(&self, y: &[f64]) -> f64 {
        // Work with the minimization form: for max, negate objective and duals.
        let s = if self.sense == Sense::Maximize { -1.0 } else { 1.0 };
        let mut worst = 0.0_f64;
        for (i, rel) in self.relations.iter().enumerate() {
            let yi = s * y[i];
            let viol = match rel {
                Relation::Le => yi,
                Relation::Ge => -yi,
                Relation::Eq => 0.0,
            };
            worst = worst.max(viol);
        }
        for j in 0..self.num_vars() {
            let aty: f64 = self.rows.iter().zip(y).map(|(row, &yi)| row[j] * s * yi).sum();
            let d = s * self.objective[j] - aty;
            worst = worst.max(if self.free[j] { d.abs() } else { -d });
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `(rows + 1) × (cols + 1)`, row-major; the last row holds reduced costs
    /// and the last column the right-hand side.
    data: Vec<f64>,
    basis: Vec<usize>,
    kinds: Vec<ColKind>,
    /// Minimization costs of the structural columns.
    costs: Vec<f64>,
    /// For each original variable: the "+" column and, if free, the "−" column.
    var_cols: Vec<(usize, Option<usize>)>,
    unit_col: Vec<usize>,
    row_sign: Vec<f64>,
    iterations: usize,
    degenerate_pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.num_constraints();
        let s = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };

        let mut kinds = Vec::new();
        let mut costs = Vec::new();
        let mut var_cols = Vec::with_capacity(lp.num_vars());
        for j in 0..lp.num_vars() {
            let plus = kinds.len();
            kinds.push(ColKind::Structural);
            costs.push(s * lp.objective[j]);
            let minus = lp.free[j].then(|| {
                kinds.push(ColKind::Structural);
                costs.push(-s * lp.objective[j]);
                plus + 1
            });
            var_cols.push((plus, minus));
        }
        let structural = kinds.len();

        let row_sign: Vec<f64> = lp.rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
        let relations: Vec<Relation> = lp
            .relations
            .iter()
            .zip(&row_sign)
            .map(|(&rel, &sg)| match (rel, sg < 0.0) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (r, _) => r,
            })
            .collect();

        // (row, column, coefficient) of every slack/surplus/artificial entry
        let mut extra = Vec::new();
        let mut unit_col = vec![0; m];
        for (i, rel) in relations.iter().enumerate() {
            match rel {
                Relation::Le => {
                    unit_col[i] = kinds.len();
                    extra.push((i, kinds.len(), 1.0));
                    kinds.push(ColKind::Slack);
                }
                Relation::Ge => {
                    extra.push((i, kinds.len(), -1.0));
                    kinds.push(ColKind::Slack);
                    unit_col[i] = kinds.len();
                    extra.push((i, kinds.len(), 1.0));
                    kinds.push(ColKind::Artificial);
                }
                Relation::Eq => {
                    unit_col[i] = kinds.len();
                    extra.push((i, kinds.len(), 1.0));
                    kinds.push(ColKind::Artificial);
                }
            }
        }
        costs.resize(kinds.len(), 0.0);

        let cols = kinds.len();
        let width = cols + 1;
        let mut data = vec![0.0; (m + 1) * width];
        for i in 0..m {
            let sg = row_sign[i];
            let row = &mut data[i * width..(i + 1) * width];
            for (j, &a) in lp.rows[i].iter().enumerate() {
                let (plus, minus) = var_cols[j];
                row[plus] = sg * a;
                if let Some(mc) = minus {
                    row[mc] = -sg * a;
                }
            }
            row[cols] = sg * lp.rhs[i];
        }
        for (i, j, a) in extra {
            data[i * width + j] = a;
        }
        debug_assert!(structural <= cols);

        Self {
            rows: m,
            cols,
            data,
            basis: unit_col.clone(),
            kinds,
            costs,
            var_cols,
            unit_col,
            row_sign,
            iterations: 0,
            degenerate_pivots: 0,
        }
    }

    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        self.at(self.rows, j)
    }

    fn objective_value(&self) -> f64 {
        -self.at(self.rows, self.cols)
    }

    /// Rewrites the bottom row as reduced costs for `cost(j)`.
    fn set_objective(&mut self, cost: impl Fn(usize) -> f64) {
        let w = self.width();
        let m = self.rows;
        let mut obj = vec![0.0; w];
        for (j, o) in obj.iter_mut().enumerate().take(self.cols) {
            *o = cost(j);
        }
        for i in 0..m {
            let cb = cost(self.basis[i]);
            if cb != 0.0 {
                let row = &self.data[i * w..(i + 1) * w];
                for (o, &a) in obj.iter_mut().zip(row) {
                    *o -= cb * a;
                }
            }
        }
        self.data[m * w..].copy_from_slice(&obj);
    }

    fn phase_one(&mut self, opts: &SimplexOptions) -> Result<(), LpError> {
        if !self.kinds.contains(&ColKind::Artificial) {
            return Ok(());
        }
        let kinds = self.kinds.clone();
        self.set_objective(|j| if kinds[j] == ColKind::Artificial { 1.0 } else { 0.0 });
        self.run(opts, true)?;
        let infeasibility = self.objective_value();
        let scale = 1.0 + (0..self.rows).map(|i| self.rhs(i).abs()).fold(0.0, f64::max);
        if infeasibility > opts.feasibility_tol * scale {
            return Err(LpError::Infeasible { phase_one_objective: infeasibility });
        }
        // Pivot zero-level artificials out of the basis where possible;
        // rows with no structural entry are redundant and keep theirs.
        for i in 0..self.rows {
            if self.kinds[self.basis[i]] != ColKind::Artificial {
                continue;
            }
            let candidate = (0..self.cols)
                .filter(|&j| self.kinds[j] != ColKind::Artificial)
                .max_by(|&a, &b| self.at(i, a).abs().total_cmp(&self.at(i, b).abs()));
            if let Some(j) = candidate {
                if self.at(i, j).abs() > opts.pivot_tol {
                    self.pivot(i, j);
                }
            }
        }
        Ok(())
    }

    fn phase_two(&mut self, opts: &SimplexOptions) -> Result<(), LpError> {
        let costs = self.costs.clone();
        self.set_objective(|j| costs[j]);
        self.run(opts, false)
    }

    fn run(&mut self, opts: &SimplexOptions, phase_one: bool) -> Result<(), LpError> {
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= opts.max_iterations {
                return Err(LpError::IterationLimit {
                    limit: opts.max_iterations,
                    objective: self.objective_value(),
                    degenerate: self.degenerate_pivots,
                });
            }
            let bland = degenerate_run >= opts.bland_after;
            let Some(col) = self.entering(opts, bland, phase_one) else {
                return Ok(());
            };
            let Some(row) = self.leaving(col, opts, bland) else {
                return Err(LpError::Unbounded { column: col, iterations: self.iterations });
            };
            let step = self.rhs(row) / self.at(row, col);
            if step.abs() <= opts.feasibility_tol * 1e-3 {
                degenerate_run += 1;
                self.degenerate_pivots += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(row, col);
            self.iterations += 1;
        }
    }

    fn entering(&self, opts: &SimplexOptions, bland: bool, phase_one: bool) -> Option<usize> {
        let eligible = |j: usize| phase_one || self.kinds[j] != ColKind::Artificial;
        let mut best: Option<(usize, f64)> = None;
        for j in (0..self.cols).filter(|&j| eligible(j)) {
            let d = self.reduced_cost(j);
            if d < -opts.optimality_tol {
                if bland {
                    return Some(j);
                }
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    fn leaving(&self, col: usize, opts: &SimplexOptions, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64, f64)> = None;
        for i in 0..self.rows {
            let a = self.at(i, col);
            if a <= opts.pivot_tol {
                continue;
            }
            let ratio = self.rhs(i).max(0.0) / a;
            best = match best {
                None => Some((i, ratio, a)),
                Some((bi, br, ba)) => {
                    let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                    let better = if tie {
                        if bland {
                            self.basis[i] < self.basis[bi]
                        } else {
                            a > ba
                        }
                    } else {
                        ratio < br
                    };
                    if better {
                        Some((i, ratio, a))
                    } else {
                        Some((bi, br, ba))
                    }
                }
            };
        }
        best.map(|(i, _, _)| i)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width();
        let p = self.data[r * w + c];
        for v in &mut self.data[r * w..(r + 1) * w] {
            *v /= p;
        }
        let pivot_row = self.data[r * w..(r + 1) * w].to_vec();
        for i in 0..=self.rows {
            if i == r {
                continue;
            }
            let row = &mut self.data[i * w..(i + 1) * w];
            let f = row[c];
            if f == 0.0 {
                continue;
            }
            for (x, &pr) in row.iter_mut().zip(&pivot_row) {
                *x -= f * pr;
            }
            row[c] = 0.0;
        }
        self.basis[r] = c;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_x_below_one() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0]);
        lp.constraint(vec![1.0], Relation::Le, 1.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_matrix_game() {
        // max v s.t. (Aᵀw)_j ≥ v, Σw = 1, w ≥ 0, v free
        let a = [[1.0, 0.0], [0.0, 1.0]];
        let mut lp = LinearProgram::new(Sense::Maximize, vec![0.0, 0.0, 1.0]);
        lp.free_variable(2);
        for j in 0..2 {
            lp.constraint(vec![a[0][j], a[1][j], -1.0], Relation::Ge, 0.0);
        }
        lp.constraint(vec![1.0, 1.0, 0.0], Relation::Eq, 1.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 0.5).abs() < 1e-12);
        assert!((s.x[0] - 0.5).abs() < 1e-12);
        // Column player's mixture is minus the duals of the ≥ rows.
        assert!((s.duals[0] + 0.5).abs() < 1e-12 && (s.duals[1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0]);
        lp.constraint(vec![1.0], Relation::Le, 1.0);
        lp.constraint(vec![1.0], Relation::Ge, 2.0);
        assert!(matches!(lp.solve(), Err(LpError::Infeasible { .. })));

        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 1.0]);
        lp.constraint(vec![1.0, -1.0], Relation::Le, 1.0);
        assert!(matches!(lp.solve(), Err(LpError::Unbounded { .. })));
    }

    #[test]
    fn negative_rhs_and_free_variable() {
        // min x - y s.t. x - y >= -0.5, x + y = 1, y free: optimum x = 0.25, y = 0.75
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0, -1.0]);
        lp.free_variable(1);
        lp.constraint(vec![1.0, -1.0], Relation::Ge, -0.5);
        lp.constraint(vec![1.0, 1.0], Relation::Eq, 1.0);
        let s = lp.solve().unwrap();
        assert!((s.objective + 0.5).abs() < 1e-12);
        assert!((s.x[0] - 0.25).abs() < 1e-12 && (s.x[1] - 0.75).abs() < 1e-12);
        // Raising the ≥ bound by δ raises the optimum by δ.
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
        assert!(s.primal_residual < 1e-12 && s.dual_residual < 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0, 2.0]);
        lp.constraint(vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.constraint(vec![2.0, 2.0], Relation::Eq, 2.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!(s.dual_residual < 1e-12);
    }

    #[test]
    fn shape_error() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0, 2.0]);
        lp.constraint(vec![1.0], Relation::Eq, 1.0);
        assert!(matches!(lp.solve(), Err(LpError::Shape { row: 0, .. })));
    }

    #[test]
    fn iteration_limit_reported() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 1.0]);
        lp.constraint(vec![1.0, 2.0], Relation::Le, 4.0);
        lp.constraint(vec![3.0, 1.0], Relation::Le, 6.0);
        let opts = SimplexOptions { max_iterations: 1, ..Default::default() };
        assert!(matches!(lp.solve_with(&opts), Err(LpError::IterationLimit { limit: 1, .. })));
    }
}
