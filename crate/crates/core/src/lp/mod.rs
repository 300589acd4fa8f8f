//! Linear and mixed-integer programming.
//!
//! Problems are stated as
//!
//! ```text
//! minimize    c'x + offset
//! subject to  row_lo <= A x <= row_hi
//!             col_lo <=   x <= col_hi
//! ```
//!
//! with optional integrality on selected columns. [`solve_lp`] runs a bounded
//! revised simplex; [`milp::solve_milp`] wraps it in branch-and-bound.

pub mod milp;
mod simplex;

pub use simplex::{Basis, VarStatus};

use crate::error::{Error, Result};

/// Handle of a column in a [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer: Vec<bool>,
    pub rows: Vec<Row>,
    pub objective_offset: f64,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> VarId {
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.integer.push(false);
        VarId(self.cost.len() - 1)
    }

    pub fn add_binary(&mut self, cost: f64) -> VarId {
        let v = self.add_var(cost, 0.0, 1.0);
        self.integer[v.0] = true;
        v
    }

    /// Adds `lower <= sum(coef * x) <= upper`. Duplicate entries are merged.
    pub fn add_row(&mut self, coeffs: &[(VarId, f64)], lower: f64, upper: f64) -> usize {
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        for &(v, a) in coeffs {
            if let Some(e) = merged.iter_mut().find(|e| e.0 == v.0) {
                e.1 += a;
            } else {
                merged.push((v.0, a));
            }
        }
        merged.retain(|e| e.1 != 0.0);
        merged.sort_by_key(|e| e.0);
        self.rows.push(Row { coeffs: merged, lower, upper });
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_integer(&self) -> usize {
        self.integer.iter().filter(|&&b| b).count()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.cost.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.coeffs.iter().map(|&(j, a)| a * x[j]).sum())
            .collect()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for (r, act) in self.rows.iter().zip(self.row_activity(x)) {
            worst = worst.max(r.lower - act).max(act - r.upper);
        }
        worst
    }

    pub(crate) fn check(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n || self.integer.len() != n {
            return Err(Error::Dimension("column arrays differ in length".into()));
        }
        for j in 0..n {
            if self.lower[j] > self.upper[j] || self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(Error::Infeasible);
            }
            if !self.cost[j].is_finite() {
                return Err(Error::InvalidParameter(format!("cost of column {j} is not finite")));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            if r.lower > r.upper {
                return Err(Error::Infeasible);
            }
            if let Some(&(j, _)) = r.coeffs.iter().find(|e| e.0 >= n) {
                return Err(Error::Dimension(format!("row {i} references column {j}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals (sensitivity of the objective to each row activity).
    pub duals: Vec<f64>,
    pub iterations: usize,
    pub basis: Basis,
}

/// Solves a linear program from a slack basis. Integrality marks are ignored.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    solve_lp_warm(lp, None)
}

/// Solves a linear program, optionally starting from a previous basis of a
/// problem with the same rows and columns (bounds may differ).
pub fn solve_lp_warm(lp: &LinearProgram, basis: Option<&Basis>) -> Result<LpSolution> {
    lp.check()?;
    let mut s = simplex::Simplex::new(lp);
    if let Some(b) = basis {
        if s.load_basis(b).is_err() {
            s.slack_basis();
        }
    }
    s.solve()?;
    Ok(s.solution(lp))
}
