//! Bounded-variable revised simplex.
//!
//! Every row `i` gets a logical column `s_i = a_iᵀx` whose bounds encode the
//! row sense, so the working system is `[A  −I] (x, s) = 0` with all
//! information carried in column bounds. The basis inverse is kept dense
//! (column-major) and updated in product form, with periodic
//! refactorization by Gauss-Jordan elimination.
//!
//! Pricing is Dantzig (largest reduced cost). After a run of degenerate
//! pivots the solver switches to Bland's rule (lowest eligible index, ties in
//! the ratio test broken by lowest column index) until a nondegenerate pivot
//! occurs. Both rules are deterministic, so a given input always produces the
//! same pivot sequence.
//!
//! Cold starts run a phase 1 over artificial columns added only to rows the
//! slack basis leaves infeasible. Warm starts reuse a basis from an earlier
//! solve and run the dual simplex, which is the natural fit when only bounds
//! or right-hand sides changed.

use crate::error::LpError;
use crate::lp::{Basis, LinearProgram, LpSolution, LpStatus, Relation, VarStatus};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
/// Pivots smaller than this after refactorization are reported as unstable.
const PIVOT_FLOOR: f64 = 1e-12;
const REFACTOR_EVERY: usize = 120;
/// Relative residual under which a product-form inverse is trusted as is.
const RESIDUAL_TOL: f64 = 1e-11;
const DEGENERATE_SWITCH: usize = 30;

/// Solves `lp` from the slack basis.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let mut s = Simplex::new(lp);
    s.cold_solve()
}

/// Solves `lp` starting from `basis`, typically taken from an earlier solve
/// of an LP with identical shape. Falls back to a cold start when the basis
/// is unusable.
pub fn solve_lp_warm(lp: &LinearProgram, basis: &Basis) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let expected = lp.num_vars() + lp.num_rows();
    if basis.status.len() != expected {
        return Err(LpError::BasisShape {
            expected,
            got: basis.status.len(),
        });
    }
    let mut s = Simplex::new(lp);
    match s.warm_solve(basis, None) {
        Ok(Some(sol)) => Ok(sol),
        Ok(None) | Err(_) => {
            let mut s = Simplex::new(lp);
            s.cold_solve()
        }
    }
}

/// A basis plus its inverse, for warm starting many LPs that share one
/// constraint matrix and differ only in bounds, costs or right-hand sides.
#[derive(Debug, Clone)]
pub struct FactoredBasis {
    basis: Basis,
    basic: Vec<usize>,
    binv: Vec<f64>,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
}

impl FactoredBasis {
    /// Factors `basis` against the matrix of `lp`. Returns `None` when the
    /// basis has the wrong number of basic columns or is singular.
    pub fn new(lp: &LinearProgram, basis: &Basis) -> Result<Option<Self>, LpError> {
        lp.validate()?;
        let expected = lp.num_vars() + lp.num_rows();
        if basis.status.len() != expected {
            return Err(LpError::BasisShape {
                expected,
                got: basis.status.len(),
            });
        }
        let mut s = Simplex::new(lp);
        s.basic = (0..expected).filter(|&k| basis.status[k] == VarStatus::Basic).collect();
        if s.basic.len() != s.m || s.refactor().is_err() {
            return Ok(None);
        }
        Ok(Some(Self {
            basis: basis.clone(),
            basic: s.basic,
            binv: s.binv,
            col_start: s.col_start,
            col_row: s.col_row,
            col_val: s.col_val,
        }))
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    fn matches(&self, s: &Simplex) -> bool {
        self.col_start == s.col_start && self.col_row == s.col_row && self.col_val == s.col_val
    }
}

/// Like [`solve_lp_warm`] but reuses the stored inverse when `lp` has the
/// same constraint matrix the basis was factored against.
pub fn solve_lp_factored(lp: &LinearProgram, factored: &FactoredBasis) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let expected = lp.num_vars() + lp.num_rows();
    if factored.basis.status.len() != expected {
        return Err(LpError::BasisShape {
            expected,
            got: factored.basis.status.len(),
        });
    }
    let mut s = Simplex::new(lp);
    let reuse = factored.matches(&s).then_some(factored);
    match s.warm_solve(&factored.basis, reuse) {
        Ok(Some(sol)) => Ok(sol),
        Ok(None) | Err(_) => {
            let mut s = Simplex::new(lp);
            s.cold_solve()
        }
    }
}

enum Outcome {
    Optimal,
    Unbounded,
    Infeasible,
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    art_row: Vec<usize>,
    art_sign: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    status: Vec<VarStatus>,
    basic: Vec<usize>,
    binv: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
    y: Vec<f64>,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram) -> Self {
        let n = lp.num_vars();
        let m = lp.num_rows();
        let mut counts = vec![0usize; n + 1];
        for row in &lp.rows {
            for &(j, _) in &row.coefs {
                counts[j + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let nnz = counts[n];
        let mut fill = counts.clone();
        let mut col_row = vec![0; nnz];
        let mut col_val = vec![0.0; nnz];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coefs {
                col_row[fill[j]] = i;
                col_val[fill[j]] = a;
                fill[j] += 1;
            }
        }
        let mut lo = lp.lower.clone();
        let mut hi = lp.upper.clone();
        for row in &lp.rows {
            let (l, h) = match row.relation {
                Relation::Le => (f64::NEG_INFINITY, row.rhs),
                Relation::Ge => (row.rhs, f64::INFINITY),
                Relation::Eq => (row.rhs, row.rhs),
            };
            lo.push(l);
            hi.push(h);
        }
        let total = n + m;
        Simplex {
            lp,
            n,
            m,
            col_start: counts,
            col_row,
            col_val,
            art_row: Vec::new(),
            art_sign: Vec::new(),
            lo,
            hi,
            cost: vec![0.0; total],
            x: vec![0.0; total],
            status: vec![VarStatus::AtLower; total],
            basic: Vec::new(),
            binv: Vec::new(),
            since_refactor: 0,
            iterations: 0,
            y: vec![0.0; m],
        }
    }

    fn ncols(&self) -> usize {
        self.n + self.m + self.art_row.len()
    }

    fn for_each_entry(&self, k: usize, mut f: impl FnMut(usize, f64)) {
        if k < self.n {
            for idx in self.col_start[k]..self.col_start[k + 1] {
                f(self.col_row[idx], self.col_val[idx]);
            }
        } else if k < self.n + self.m {
            f(k - self.n, -1.0);
        } else {
            let a = k - self.n - self.m;
            f(self.art_row[a], self.art_sign[a]);
        }
    }

    fn dot_y(&self, k: usize) -> f64 {
        let mut s = 0.0;
        self.for_each_entry(k, |i, v| s += self.y[i] * v);
        s
    }

    fn reduced_cost(&self, k: usize) -> f64 {
        self.cost[k] - self.dot_y(k)
    }

    fn is_fixed(&self, k: usize) -> bool {
        self.lo[k] == self.hi[k]
    }

    /// Nonbasic resting position for a column given a requested status.
    fn place_nonbasic(&mut self, k: usize, wanted: VarStatus) {
        let (l, h) = (self.lo[k], self.hi[k]);
        let st = match wanted {
            VarStatus::AtUpper if h.is_finite() => VarStatus::AtUpper,
            VarStatus::AtLower if l.is_finite() => VarStatus::AtLower,
            _ if l.is_finite() => VarStatus::AtLower,
            _ if h.is_finite() => VarStatus::AtUpper,
            _ => VarStatus::Free,
        };
        self.status[k] = st;
        self.x[k] = match st {
            VarStatus::AtLower => l,
            VarStatus::AtUpper => h,
            _ => 0.0,
        };
    }

    // ---------------------------------------------------------------- linear algebra

    fn ftran(&self, k: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        self.for_each_entry(k, |i, v| {
            let col = &self.binv[i * m..(i + 1) * m];
            for (a, b) in alpha.iter_mut().zip(col) {
                *a += v * b;
            }
        });
        alpha
    }

    fn binv_row(&self, p: usize) -> Vec<f64> {
        let m = self.m;
        (0..m).map(|i| self.binv[i * m + p]).collect()
    }

    fn compute_duals(&mut self) {
        let m = self.m;
        let nz: Vec<(usize, f64)> = self
            .basic
            .iter()
            .enumerate()
            .filter_map(|(p, &k)| (self.cost[k] != 0.0).then_some((p, self.cost[k])))
            .collect();
        for i in 0..m {
            let col = &self.binv[i * m..(i + 1) * m];
            self.y[i] = nz.iter().map(|&(p, c)| c * col[p]).sum();
        }
    }

    fn pivot_update(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        let nz: Vec<usize> = (0..m).filter(|&p| p != r && alpha[p] != 0.0).collect();
        for c in 0..m {
            let base = c * m;
            let v = self.binv[base + r] / piv;
            if v != 0.0 {
                for &p in &nz {
                    self.binv[base + p] -= alpha[p] * v;
                }
            }
            self.binv[base + r] = v;
        }
        self.since_refactor += 1;
    }

    /// Rebuilds the basis inverse and the basic primal values from scratch.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        // Row-major augmented [B | I].
        let w = 2 * m;
        let mut aug = vec![0.0; m * w];
        for (p, &k) in self.basic.iter().enumerate() {
            let mut entries = Vec::new();
            self.for_each_entry(k, |i, v| entries.push((i, v)));
            for (i, v) in entries {
                aug[i * w + p] = v;
            }
        }
        for i in 0..m {
            aug[i * w + m + i] = 1.0;
        }
        for c in 0..m {
            let mut best = c;
            let mut best_abs = aug[c * w + c].abs();
            for r in c + 1..m {
                let a = aug[r * w + c].abs();
                if a > best_abs {
                    best = r;
                    best_abs = a;
                }
            }
            if best_abs < PIVOT_FLOOR {
                return Err(LpError::NumericalInstability(best_abs));
            }
            if best != c {
                for j in 0..w {
                    aug.swap(c * w + j, best * w + j);
                }
            }
            let inv = 1.0 / aug[c * w + c];
            for j in 0..w {
                aug[c * w + j] *= inv;
            }
            let pivot_row: Vec<f64> = aug[c * w..(c + 1) * w].to_vec();
            let nzj: Vec<usize> = (0..w).filter(|&j| pivot_row[j] != 0.0).collect();
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = aug[r * w + c];
                if f != 0.0 {
                    for &j in &nzj {
                        aug[r * w + j] -= f * pivot_row[j];
                    }
                }
            }
        }
        // aug right half row p col i = (B^{-1})_{p,i}; store column-major.
        self.binv = vec![0.0; m * m];
        for p in 0..m {
            for i in 0..m {
                self.binv[i * m + p] = aug[p * w + m + i];
            }
        }
        self.since_refactor = 0;
        self.recompute_basic_values();
        Ok(())
    }

    fn recompute_basic_values(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for k in 0..self.ncols() {
            if self.status[k] != VarStatus::Basic && self.x[k] != 0.0 {
                let xk = self.x[k];
                self.for_each_entry(k, |i, v| rhs[i] -= v * xk);
            }
        }
        for p in 0..m {
            let mut s = 0.0;
            for (i, r) in rhs.iter().enumerate() {
                if *r != 0.0 {
                    s += self.binv[i * m + p] * r;
                }
            }
            let k = self.basic[p];
            self.x[k] = s;
        }
    }

    /// True when the updated inverse still reproduces `[A −I](x, s) = 0` and
    /// zero reduced costs on the basic columns, so a refactorization would
    /// not change the answer.
    fn residuals_small(&mut self) -> bool {
        let mut r = vec![0.0; self.m];
        let mut scale = 1.0f64;
        for k in 0..self.ncols() {
            let xk = self.x[k];
            if xk != 0.0 {
                scale = scale.max(xk.abs());
                self.for_each_entry(k, |i, v| r[i] += v * xk);
            }
        }
        if r.iter().any(|v| v.abs() > RESIDUAL_TOL * scale) {
            return false;
        }
        self.compute_duals();
        let cscale = self.basic.iter().fold(1.0f64, |a, &k| a.max(self.cost[k].abs()));
        self.basic
            .iter()
            .all(|&k| self.reduced_cost(k).abs() <= RESIDUAL_TOL * cscale)
    }

    fn infeasibility(&self, k: usize) -> f64 {
        let v = self.x[k];
        if v < self.lo[k] - PRIMAL_TOL {
            self.lo[k] - v
        } else if v > self.hi[k] + PRIMAL_TOL {
            v - self.hi[k]
        } else {
            0.0
        }
    }

    fn iteration_cap(&self) -> usize {
        50 * (self.ncols() + self.m) + 1000
    }

    // ---------------------------------------------------------------- primal

    fn primal(&mut self) -> Result<Outcome, LpError> {
        let cap = self.iteration_cap();
        let mut degenerate_run = 0usize;
        let mut local_iters = 0usize;
        loop {
            if local_iters > cap {
                return Err(LpError::IterationLimit(cap));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            self.compute_duals();
            let bland = degenerate_run >= DEGENERATE_SWITCH;

            let mut entering: Option<(usize, f64)> = None;
            for k in 0..self.ncols() {
                let st = self.status[k];
                if st == VarStatus::Basic || self.is_fixed(k) {
                    continue;
                }
                let d = self.reduced_cost(k);
                let eligible = match st {
                    VarStatus::AtLower => d < -DUAL_TOL,
                    VarStatus::AtUpper => d > DUAL_TOL,
                    VarStatus::Free => d.abs() > DUAL_TOL,
                    VarStatus::Basic => false,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    entering = Some((k, d));
                    break;
                }
                if entering.is_none_or(|(_, bd)| d.abs() > bd.abs()) {
                    entering = Some((k, d));
                }
            }
            let Some((k, d)) = entering else {
                return Ok(Outcome::Optimal);
            };
            let dir = if d < 0.0 { 1.0 } else { -1.0 };
            let alpha = self.ftran(k);

            // Ratio test.
            let mut theta = self.hi[k] - self.lo[k];
            if !theta.is_finite() {
                theta = f64::INFINITY;
            }
            let mut leave: Option<(usize, f64)> = None; // (position, |alpha|)
            for p in 0..self.m {
                let a = dir * alpha[p];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basic[p];
                let limit = if a > 0.0 {
                    if self.lo[b].is_finite() {
                        ((self.x[b] - self.lo[b]) / a).max(0.0)
                    } else {
                        continue;
                    }
                } else if self.hi[b].is_finite() {
                    ((self.hi[b] - self.x[b]) / -a).max(0.0)
                } else {
                    continue;
                };
                let take = if limit < theta - 1e-12 {
                    true
                } else if limit <= theta + 1e-12 {
                    // On a tie with the entering column's own bound flip, flip.
                    match leave {
                        None => false,
                        Some((q, qa)) => {
                            if bland {
                                b < self.basic[q]
                            } else {
                                a.abs() > qa
                            }
                        }
                    }
                } else {
                    false
                };
                if take {
                    theta = theta.min(limit);
                    leave = Some((p, a.abs()));
                }
            }
            if !theta.is_finite() {
                return Ok(Outcome::Unbounded);
            }
            self.iterations += 1;
            local_iters += 1;
            if theta <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            let step = dir * theta;
            if step != 0.0 {
                for p in 0..self.m {
                    if alpha[p] != 0.0 {
                        let b = self.basic[p];
                        self.x[b] -= step * alpha[p];
                    }
                }
            }
            match leave {
                None => {
                    // Bound flip.
                    if dir > 0.0 {
                        self.status[k] = VarStatus::AtUpper;
                        self.x[k] = self.hi[k];
                    } else {
                        self.status[k] = VarStatus::AtLower;
                        self.x[k] = self.lo[k];
                    }
                }
                Some((r, _)) => {
                    if alpha[r].abs() < PIVOT_FLOOR {
                        return Err(LpError::NumericalInstability(alpha[r].abs()));
                    }
                    let b = self.basic[r];
                    let a = dir * alpha[r];
                    if a > 0.0 {
                        self.status[b] = VarStatus::AtLower;
                        self.x[b] = self.lo[b];
                    } else {
                        self.status[b] = VarStatus::AtUpper;
                        self.x[b] = self.hi[b];
                    }
                    self.x[k] += step;
                    self.status[k] = VarStatus::Basic;
                    self.basic[r] = k;
                    self.pivot_update(r, &alpha);
                    self.after_leave(b);
                }
            }
        }
    }

    /// Artificial columns are retired permanently once they leave the basis.
    fn after_leave(&mut self, b: usize) {
        if b >= self.n + self.m {
            self.lo[b] = 0.0;
            self.hi[b] = 0.0;
            self.x[b] = 0.0;
            self.status[b] = VarStatus::AtLower;
        }
    }

    // ---------------------------------------------------------------- dual

    fn dual(&mut self) -> Result<Outcome, LpError> {
        let cap = self.iteration_cap();
        let mut local_iters = 0usize;
        loop {
            if local_iters > cap {
                return Err(LpError::IterationLimit(cap));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let mut leave: Option<(usize, f64)> = None;
            for p in 0..self.m {
                let b = self.basic[p];
                let inf = self.infeasibility(b);
                if inf > 0.0 {
                    let better = match leave {
                        None => true,
                        Some((q, qi)) => inf > qi || (inf == qi && b < self.basic[q]),
                    };
                    if better {
                        leave = Some((p, inf));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Ok(Outcome::Optimal);
            };
            let b = self.basic[r];
            let below = self.x[b] < self.lo[b];
            let target = if below { self.lo[b] } else { self.hi[b] };

            self.compute_duals();
            let rho = self.binv_row(r);
            let mut entering: Option<(usize, f64, f64)> = None; // (k, ratio, |alpha_rk|)
            for k in 0..self.ncols() {
                let st = self.status[k];
                if st == VarStatus::Basic || self.is_fixed(k) {
                    continue;
                }
                let mut ark = 0.0;
                self.for_each_entry(k, |i, v| ark += rho[i] * v);
                if ark.abs() <= PIVOT_TOL {
                    continue;
                }
                let can_up = matches!(st, VarStatus::AtLower | VarStatus::Free);
                let can_down = matches!(st, VarStatus::AtUpper | VarStatus::Free);
                let ok = if below {
                    (can_up && ark < 0.0) || (can_down && ark > 0.0)
                } else {
                    (can_up && ark > 0.0) || (can_down && ark < 0.0)
                };
                if !ok {
                    continue;
                }
                let d = self.reduced_cost(k);
                let d = match st {
                    VarStatus::AtLower => d.max(0.0),
                    VarStatus::AtUpper => d.min(0.0),
                    _ => d,
                };
                let ratio = d.abs() / ark.abs();
                let better = match entering {
                    None => true,
                    Some((ek, er, ea)) => {
                        ratio < er - 1e-12
                            || (ratio <= er + 1e-12
                                && (ark.abs() > ea || (ark.abs() == ea && k < ek)))
                    }
                };
                if better {
                    entering = Some((k, ratio, ark.abs()));
                }
            }
            let Some((k, _, _)) = entering else {
                return Ok(Outcome::Infeasible);
            };
            let alpha = self.ftran(k);
            if alpha[r].abs() < PIVOT_FLOOR {
                return Err(LpError::NumericalInstability(alpha[r].abs()));
            }
            let dxk = (self.x[b] - target) / alpha[r];
            for p in 0..self.m {
                if alpha[p] != 0.0 {
                    let bp = self.basic[p];
                    self.x[bp] -= alpha[p] * dxk;
                }
            }
            self.x[k] += dxk;
            self.x[b] = target;
            self.status[b] = if below {
                VarStatus::AtLower
            } else {
                VarStatus::AtUpper
            };
            self.status[k] = VarStatus::Basic;
            self.basic[r] = k;
            self.pivot_update(r, &alpha);
            self.after_leave(b);
            self.iterations += 1;
            local_iters += 1;
        }
    }

    // ---------------------------------------------------------------- drivers

    fn slack_basis(&mut self) {
        let (n, m) = (self.n, self.m);
        for j in 0..n {
            self.place_nonbasic(j, VarStatus::AtLower);
        }
        self.basic = (n..n + m).collect();
        for i in 0..m {
            self.status[n + i] = VarStatus::Basic;
        }
        // B = −I.
        self.binv = vec![0.0; m * m];
        for i in 0..m {
            self.binv[i * m + i] = -1.0;
        }
        self.recompute_basic_values();
    }

    fn cold_solve(&mut self) -> Result<LpSolution, LpError> {
        self.slack_basis();
        let (n, m) = (self.n, self.m);

        // Rows whose logical is out of bounds get an artificial.
        for i in 0..m {
            let s = n + i;
            let v = self.x[s];
            let bound = if v < self.lo[s] - PRIMAL_TOL {
                self.lo[s]
            } else if v > self.hi[s] + PRIMAL_TOL {
                self.hi[s]
            } else {
                continue;
            };
            // a_iᵀx − s_i + σ·art = 0 with s_i at `bound`  ⇒  art = (bound − v)/σ.
            let sign = if bound > v { 1.0 } else { -1.0 };
            let art = self.ncols();
            self.art_row.push(i);
            self.art_sign.push(sign);
            self.lo.push(0.0);
            self.hi.push(f64::INFINITY);
            self.cost.push(0.0);
            self.x.push((bound - v).abs());
            self.status.push(VarStatus::Basic);
            self.status[s] = if bound == self.lo[s] {
                VarStatus::AtLower
            } else {
                VarStatus::AtUpper
            };
            self.x[s] = bound;
            self.basic[i] = art;
            // Column i of B is now σ e_i (was −e_i).
            self.binv[i * m + i] = 1.0 / sign;
        }

        if !self.art_row.is_empty() {
            for k in 0..self.ncols() {
                self.cost[k] = if k >= n + m { 1.0 } else { 0.0 };
            }
            match self.primal()? {
                Outcome::Optimal => {}
                _ => unreachable!("phase 1 objective is bounded below"),
            }
            let art_sum: f64 = (n + m..self.ncols()).map(|k| self.x[k].abs()).sum();
            let scale = 1.0
                + self
                    .lp
                    .rows
                    .iter()
                    .map(|r| r.rhs.abs())
                    .fold(0.0, f64::max);
            if art_sum > 1e-8 * scale {
                return Ok(LpSolution::without_point(
                    LpStatus::Infeasible,
                    n,
                    m,
                    self.iterations,
                ));
            }
            self.retire_artificials();
        }
        self.set_phase2_costs();
        self.finish(true)
    }

    /// Replaces any artificial still basic (necessarily at zero) by its row's
    /// logical, then fixes all artificials at zero.
    fn retire_artificials(&mut self) {
        let (n, m) = (self.n, self.m);
        for p in 0..m {
            let k = self.basic[p];
            if k >= n + m {
                let a = k - n - m;
                let row = self.art_row[a];
                let s = n + row;
                debug_assert_ne!(self.status[s], VarStatus::Basic);
                if self.art_sign[a] > 0.0 {
                    for c in 0..m {
                        self.binv[c * m + p] = -self.binv[c * m + p];
                    }
                }
                self.basic[p] = s;
                self.status[s] = VarStatus::Basic;
                self.status[k] = VarStatus::AtLower;
            }
        }
        for k in n + m..self.ncols() {
            self.lo[k] = 0.0;
            self.hi[k] = 0.0;
            self.x[k] = 0.0;
            self.status[k] = VarStatus::AtLower;
        }
    }

    fn set_phase2_costs(&mut self) {
        for k in 0..self.ncols() {
            self.cost[k] = if k < self.n { self.lp.objective[k] } else { 0.0 };
        }
    }

    fn warm_solve(&mut self, basis: &Basis, factored: Option<&FactoredBasis>) -> Result<Option<LpSolution>, LpError> {
        let (n, m) = (self.n, self.m);
        self.basic.clear();
        for k in 0..n + m {
            match basis.status[k] {
                VarStatus::Basic => {
                    self.status[k] = VarStatus::Basic;
                    self.basic.push(k);
                }
                st => self.place_nonbasic(k, st),
            }
        }
        if self.basic.len() != m {
            return Ok(None);
        }
        self.set_phase2_costs();
        match factored {
            Some(f) => {
                self.basic.clone_from(&f.basic);
                self.binv.clone_from(&f.binv);
                self.since_refactor = 0;
                self.recompute_basic_values();
            }
            None => self.refactor()?,
        }
        self.compute_duals();

        let mut dual_feasible = true;
        let mut flipped = false;
        for k in 0..n + m {
            let st = self.status[k];
            if st == VarStatus::Basic || self.is_fixed(k) {
                continue;
            }
            let d = self.reduced_cost(k);
            let bad = match st {
                VarStatus::AtLower => d < -DUAL_TOL,
                VarStatus::AtUpper => d > DUAL_TOL,
                VarStatus::Free => d.abs() > DUAL_TOL,
                VarStatus::Basic => false,
            };
            if !bad {
                continue;
            }
            if self.lo[k].is_finite() && self.hi[k].is_finite() {
                let to = if d < 0.0 {
                    VarStatus::AtUpper
                } else {
                    VarStatus::AtLower
                };
                self.place_nonbasic(k, to);
                flipped = true;
            } else {
                dual_feasible = false;
            }
        }
        if flipped {
            self.recompute_basic_values();
        }
        let primal_feasible = self.basic.iter().all(|&k| self.infeasibility(k) == 0.0);
        if dual_feasible {
            if let Outcome::Infeasible = self.dual()? {
                return Ok(Some(LpSolution::without_point(LpStatus::Infeasible, n, m, self.iterations)));
            }
        } else if !primal_feasible {
            return Ok(None);
        }
        self.finish(false).map(Some)
    }

    /// Runs primal phase 2 to optimality, refreshes the factorization and
    /// polishes with dual/primal passes until the point is clean.
    fn finish(&mut self, _cold: bool) -> Result<LpSolution, LpError> {
        let (n, m) = (self.n, self.m);
        for _ in 0..4 {
            match self.primal()? {
                Outcome::Unbounded => {
                    return Ok(LpSolution::without_point(
                        LpStatus::Unbounded,
                        n,
                        m,
                        self.iterations,
                    ))
                }
                Outcome::Infeasible => unreachable!(),
                Outcome::Optimal => {}
            }
            if self.since_refactor == 0 || self.residuals_small() {
                break;
            }
            self.refactor()?;
            if self.basic.iter().all(|&k| self.infeasibility(k) == 0.0) {
                // Recheck dual optimality with the fresh inverse.
                continue;
            }
            if let Outcome::Infeasible = self.dual()? {
                return Ok(LpSolution::without_point(
                    LpStatus::Infeasible,
                    n,
                    m,
                    self.iterations,
                ));
            }
        }
        self.compute_duals();
        let mut x: Vec<f64> = self.x[..n].to_vec();
        for j in 0..n {
            // Snap nonbasic values exactly onto their bounds.
            match self.status[j] {
                VarStatus::AtLower => x[j] = self.lo[j],
                VarStatus::AtUpper => x[j] = self.hi[j],
                _ => {}
            }
        }
        let reduced_costs: Vec<f64> = (0..n)
            .map(|j| {
                if self.status[j] == VarStatus::Basic {
                    0.0
                } else {
                    self.reduced_cost(j)
                }
            })
            .collect();
        let duals = self.y.clone();
        let objective = self.lp.objective_value(&x);
        let basis = Basis {
            status: self.status[..n + m].to_vec(),
        };
        Ok(LpSolution {
            status: LpStatus::Optimal,
            x,
            objective,
            duals,
            reduced_costs,
            basis: Some(basis),
            iterations: self.iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp_one_var() -> LinearProgram {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, 10.0, 1.0);
        lp.add_row(vec![(x, 1.0)], Relation::Ge, 3.0);
        lp
    }

    #[test]
    fn single_variable_lower_row() {
        let sol = solve_lp(&lp_one_var()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 3.0).abs() < 1e-12);
        assert!((sol.objective - 3.0).abs() < 1e-12);
        assert!((sol.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_vertex_has_negative_le_dual() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, 1.0, -1.0);
        let y = lp.add_var(0.0, 1.0, -1.0);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Relation::Le, 1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 1.0).abs() < 1e-12);
        assert!((sol.duals[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, 1.0, 1.0);
        lp.add_row(vec![(x, 1.0)], Relation::Ge, 2.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, f64::INFINITY, -1.0);
        let y = lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0);
        lp.add_row(vec![(x, 1.0), (y, -1.0)], Relation::Le, 4.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min |t| style: x free, x = 2 - z, z in [0, 5], cost on z.
        let mut lp = LinearProgram::new();
        let x = lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0);
        let z = lp.add_var(0.0, 5.0, 1.0);
        lp.add_row(vec![(x, 1.0), (z, 1.0)], Relation::Eq, 2.0);
        lp.add_row(vec![(x, 1.0)], Relation::Le, -1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] + 1.0).abs() < 1e-9);
        assert!((sol.x[1] - 3.0).abs() < 1e-9);
        assert!((sol.objective - sol.dual_objective(&lp)).abs() < 1e-9);
    }

    #[test]
    fn no_rows() {
        let mut lp = LinearProgram::new();
        lp.add_var(-1.0, 2.0, 1.0);
        lp.add_var(-1.0, 2.0, -3.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.x, vec![-1.0, 2.0]);
        assert_eq!(sol.objective, -7.0);
    }

    #[test]
    fn warm_start_after_rhs_change_matches_cold() {
        let mut lp = LinearProgram::new();
        let a = lp.add_var(0.0, f64::INFINITY, 2.0);
        let b = lp.add_var(0.0, f64::INFINITY, 3.0);
        let c = lp.add_var(0.0, 4.0, 1.0);
        lp.add_row(vec![(a, 1.0), (b, 1.0), (c, 1.0)], Relation::Ge, 6.0);
        lp.add_row(vec![(a, 1.0), (b, -1.0)], Relation::Le, 1.0);
        let first = solve_lp(&lp).unwrap();
        lp.rows[0].rhs = 9.0;
        let warm = solve_lp_warm(&lp, first.basis.as_ref().unwrap()).unwrap();
        let cold = solve_lp(&lp).unwrap();
        assert!((warm.objective - cold.objective).abs() < 1e-9);
        assert!(lp.max_violation(&warm.x) < 1e-9);
    }

    #[test]
    fn factored_basis_reused_across_rhs_changes() {
        let mut lp = LinearProgram::new();
        let a = lp.add_var(0.0, f64::INFINITY, 2.0);
        let b = lp.add_var(0.0, f64::INFINITY, 3.0);
        let c = lp.add_var(0.0, 4.0, 1.0);
        lp.add_row(vec![(a, 1.0), (b, 1.0), (c, 1.0)], Relation::Ge, 6.0);
        lp.add_row(vec![(a, 1.0), (b, -1.0)], Relation::Le, 1.0);
        let first = solve_lp(&lp).unwrap();
        let factored = FactoredBasis::new(&lp, first.basis.as_ref().unwrap()).unwrap().unwrap();
        for rhs in [0.0, 2.5, 6.0, 9.0, 20.0] {
            lp.rows[0].rhs = rhs;
            let warm = solve_lp_factored(&lp, &factored).unwrap();
            let cold = solve_lp(&lp).unwrap();
            assert!((warm.objective - cold.objective).abs() < 1e-9, "rhs {rhs}");
            assert!((warm.objective - warm.dual_objective(&lp)).abs() < 1e-9);
        }
        // A different matrix falls back to an ordinary warm start.
        lp.rows[1].coefs[1].1 = -2.0;
        let warm = solve_lp_factored(&lp, &factored).unwrap();
        assert!((warm.objective - solve_lp(&lp).unwrap().objective).abs() < 1e-9);
    }

    #[test]
    fn rejects_inverted_bounds() {
        let mut lp = LinearProgram::new();
        lp.add_var(1.0, 0.0, 1.0);
        assert!(matches!(solve_lp(&lp), Err(LpError::Malformed(_))));
    }
}
