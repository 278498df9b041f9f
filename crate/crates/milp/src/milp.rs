//! Branch and bound over integer-restricted columns.
//!
//! Nodes are explored best-bound first (ties by creation order). The branching
//! column is the most fractional integer variable, ties going to the lowest
//! index. Child LPs warm start from the parent's optimal basis, so each node
//! costs only a few dual simplex pivots.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::error::LpError;
use crate::lp::{Basis, LinearProgram, LpStatus};
use crate::simplex::{solve_lp, solve_lp_warm};

const INT_TOL: f64 = 1e-6;

/// A linear program plus the set of columns restricted to integers.
#[derive(Debug, Clone, Default)]
pub struct MilpModel {
    pub lp: LinearProgram,
    pub integers: Vec<usize>,
}

impl MilpModel {
    pub fn new(lp: LinearProgram) -> Self {
        Self {
            lp,
            integers: Vec::new(),
        }
    }

    /// Adds a `{0,1}` column.
    pub fn add_binary(&mut self, cost: f64) -> usize {
        let j = self.lp.add_var(0.0, 1.0, cost);
        self.integers.push(j);
        j
    }

    pub fn validate(&self) -> Result<(), LpError> {
        self.lp.validate()?;
        for &j in &self.integers {
            if j >= self.lp.num_vars() {
                return Err(LpError::Malformed(format!("integer column {j} out of range")));
            }
            let (l, h) = (self.lp.lower[j], self.lp.upper[j]);
            if !l.is_finite() || !h.is_finite() {
                return Err(LpError::Malformed(format!("integer column {j} is unbounded")));
            }
            if l.fract() != 0.0 || h.fract() != 0.0 {
                return Err(LpError::Malformed(format!(
                    "integer column {j} has non-integral bounds [{l}, {h}]"
                )));
            }
        }
        Ok(())
    }

    /// Largest bound, row or integrality violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let integrality = self
            .integers
            .iter()
            .map(|&j| (x[j] - x[j].round()).abs())
            .fold(0.0, f64::max);
        self.lp.max_violation(x).max(integrality)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    /// Search finished; the incumbent is proven optimal.
    Optimal,
    /// Time limit hit with an incumbent; see `gap`.
    TimeLimit,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Default)]
pub struct MilpOptions {
    pub time_limit: Option<Duration>,
    /// Optional starting incumbent; ignored unless feasible.
    pub warm_start: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub best_bound: f64,
    /// Relative gap `(objective − bound) / max(1, |objective|)`.
    pub gap: f64,
    pub nodes: usize,
}

impl MilpSolution {
    pub fn has_solution(&self) -> bool {
        matches!(self.status, MilpStatus::Optimal | MilpStatus::TimeLimit)
    }
}

struct Node {
    bound: f64,
    id: usize,
    changes: Vec<(usize, f64, f64)>,
    basis: Option<Arc<Basis>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smaller bound, then smaller id, pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

fn prune_tol(incumbent: f64) -> f64 {
    1e-9 * incumbent.abs().max(1.0)
}

pub fn solve_milp(model: &MilpModel, options: &MilpOptions) -> Result<MilpSolution, LpError> {
    model.validate()?;
    let started = Instant::now();
    let mut is_int = vec![false; model.lp.num_vars()];
    for &j in &model.integers {
        is_int[j] = true;
    }

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    if let Some(w) = &options.warm_start {
        if w.len() == model.lp.num_vars() && model.max_violation(w) <= 1e-6 {
            incumbent = Some((model.lp.objective_value(w), w.clone()));
        }
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        id: 0,
        changes: Vec::new(),
        basis: None,
    });
    let mut next_id = 1usize;
    let mut nodes = 0usize;
    let mut lp = model.lp.clone();
    let mut root_unbounded = false;

    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &incumbent {
            if node.bound >= inc - prune_tol(*inc) {
                heap.clear();
                break;
            }
        }
        if let Some(limit) = options.time_limit {
            if started.elapsed() >= limit && incumbent.is_some() {
                let bound = node.bound.min(
                    heap.iter()
                        .map(|n| n.bound)
                        .fold(f64::INFINITY, f64::min),
                );
                let (obj, x) = incumbent.take().expect("checked above");
                return Ok(MilpSolution {
                    status: MilpStatus::TimeLimit,
                    gap: (obj - bound).max(0.0) / obj.abs().max(1.0),
                    x,
                    objective: obj,
                    best_bound: bound,
                    nodes,
                });
            }
        }
        nodes += 1;

        lp.lower.copy_from_slice(&model.lp.lower);
        lp.upper.copy_from_slice(&model.lp.upper);
        for &(j, l, h) in &node.changes {
            lp.lower[j] = l;
            lp.upper[j] = h;
        }
        let sol = match &node.basis {
            Some(b) => solve_lp_warm(&lp, b)?,
            None => solve_lp(&lp)?,
        };
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if node.id == 0 {
                    root_unbounded = true;
                    break;
                }
                continue;
            }
            LpStatus::Optimal => {}
        }
        if let Some((inc, _)) = &incumbent {
            if sol.objective >= inc - prune_tol(*inc) {
                continue;
            }
        }

        let mut branch: Option<(usize, f64)> = None;
        for &j in &model.integers {
            let v = sol.x[j];
            let frac = v - v.floor();
            if frac > INT_TOL && frac < 1.0 - INT_TOL {
                let score = (frac - 0.5).abs();
                if branch.is_none_or(|(_, s)| score < s) {
                    branch = Some((j, score));
                }
            }
        }
        match branch {
            None => {
                let mut x = sol.x.clone();
                for &j in &model.integers {
                    x[j] = x[j].round();
                }
                let obj = model.lp.objective_value(&x);
                if incumbent.as_ref().is_none_or(|(inc, _)| obj < *inc) {
                    incumbent = Some((obj, x));
                }
            }
            Some((j, _)) => {
                let v = sol.x[j];
                let basis = sol.basis.map(Arc::new);
                let (lo, hi) = (lp.lower[j], lp.upper[j]);
                let mut down = node.changes.clone();
                down.push((j, lo, v.floor()));
                let mut up = node.changes;
                up.push((j, v.ceil(), hi));
                for changes in [down, up] {
                    heap.push(Node {
                        bound: sol.objective,
                        id: next_id,
                        changes,
                        basis: basis.clone(),
                    });
                    next_id += 1;
                }
            }
        }
    }

    let n = model.lp.num_vars();
    Ok(match incumbent {
        Some((obj, x)) => MilpSolution {
            status: MilpStatus::Optimal,
            x,
            objective: obj,
            best_bound: obj,
            gap: 0.0,
            nodes,
        },
        None if root_unbounded => MilpSolution {
            status: MilpStatus::Unbounded,
            x: vec![0.0; n],
            objective: f64::NEG_INFINITY,
            best_bound: f64::NEG_INFINITY,
            gap: f64::INFINITY,
            nodes,
        },
        None => MilpSolution {
            status: MilpStatus::Infeasible,
            x: vec![0.0; n],
            objective: f64::INFINITY,
            best_bound: f64::INFINITY,
            gap: f64::INFINITY,
            nodes,
        },
    })
}
