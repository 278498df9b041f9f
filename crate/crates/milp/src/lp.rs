//! Linear program data model.
//!
//! Problems are always minimizations. Each constraint row is
//! `Σ a_ij x_j  (≤ | = | ≥)  b_i` and each variable carries `[lo, hi]`
//! bounds, either of which may be infinite.
//!
//! # Dual sign convention
//!
//! Row duals are shadow prices, `y_i = ∂z*/∂b_i`. For a minimization this
//! gives `y_i ≤ 0` on active `≤` rows, `y_i ≥ 0` on active `≥` rows and a
//! free sign on equality rows. Reduced costs are `d_j = c_j − Σ_i y_i a_ij`,
//! and at an optimum
//!
//! ```text
//! cᵀx = Σ_i y_i b_i + Σ_j d_j x_j
//! ```
//!
//! where only nonbasic structurals sitting at a finite bound contribute to the
//! second sum.

use crate::error::LpError;

/// Constraint sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// One sparse constraint row.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coefs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.relation {
            Relation::Le => (act - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - act).max(0.0),
            Relation::Eq => (act - self.rhs).abs(),
        }
    }
}

/// A minimization LP over bounded variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Adds a variable and returns its column index.
    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    /// Adds a row and returns its index. Duplicate column entries are merged.
    pub fn add_row(&mut self, coefs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        let mut coefs = coefs;
        coefs.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coefs.len());
        for (j, a) in coefs {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += a,
                _ => merged.push((j, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.rows.push(Constraint {
            coefs: merged,
            relation,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = x
            .iter()
            .enumerate()
            .map(|(j, &v)| (self.lower[j] - v).max(v - self.upper[j]).max(0.0))
            .fold(0.0, f64::max);
        self.rows
            .iter()
            .map(|r| r.violation(x))
            .fold(bounds, f64::max)
    }

    /// Checks dimensions, bound ordering and finiteness of the data.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed(format!(
                "bound vectors have lengths {}/{} for {} variables",
                self.lower.len(),
                self.upper.len(),
                n
            )));
        }
        for j in 0..n {
            if !self.objective[j].is_finite() {
                return Err(LpError::Malformed(format!("objective coefficient {j} is not finite")));
            }
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(LpError::Malformed(format!(
                    "variable {j} has bounds [{}, {}]",
                    self.lower[j], self.upper[j]
                )));
            }
            if self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!("variable {j} has an empty domain")));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::Malformed(format!("row {i} has non-finite rhs")));
            }
            for &(j, a) in &row.coefs {
                if j >= n {
                    return Err(LpError::Malformed(format!("row {i} references column {j} >= {n}")));
                }
                if !a.is_finite() {
                    return Err(LpError::Malformed(format!("row {i} has a non-finite coefficient")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Position of a column relative to the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free column resting at zero.
    Free,
}

/// Basis snapshot usable to warm start a later solve of an LP with the same
/// shape. Holds one status per structural column followed by one per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub status: Vec<VarStatus>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Shadow price per row (see module docs for the sign convention).
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub basis: Option<Basis>,
    pub iterations: usize,
}

impl LpSolution {
    pub(crate) fn without_point(status: LpStatus, n: usize, m: usize, iterations: usize) -> Self {
        Self {
            status,
            x: vec![0.0; n],
            objective: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            duals: vec![0.0; m],
            reduced_costs: vec![0.0; n],
            basis: None,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// `Σ y_i b_i + Σ d_j x_j` over structurals resting on a finite bound.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        let rows: f64 = lp.rows.iter().zip(&self.duals).map(|(r, y)| r.rhs * y).sum();
        let bounds: f64 = (0..lp.num_vars())
            .map(|j| {
                let d = self.reduced_costs[j];
                if d == 0.0 {
                    0.0
                } else {
                    d * self.x[j]
                }
            })
            .sum();
        rows + bounds
    }
}
