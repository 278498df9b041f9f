//! Optimization models built from a [`UcInstance`]: the full MILP, the
//! dispatch subproblem for a fixed commitment, and the small binary program
//! that bounds a cut's left-hand side over feasible commitments.
//!
//! Commitment binaries use one flat index shared by every model:
//! `kind·G·T + g·T + t` with kinds `u`, `v`, `w` in that order. In the full
//! MILP they are the first `3·G·T` columns and the dispatch block follows.
//!
//! Dispatch rows are generated once in a tagged form,
//! `coefs·x (rel) rhs_const + Σ commit_terms·(u,v,w)`, so the same rows serve
//! the subproblem (commitment on the right-hand side), the full MILP
//! (commitment moved to the left) and cut assembly (duals times the
//! commitment terms).

use std::fmt;

use serde::Serialize;
use thiserror::Error;
use uc_milp::{
    solve_lp, solve_lp_factored, solve_lp_warm, solve_milp, Basis, FactoredBasis, LinearProgram, LpError,
    LpSolution, LpStatus, MilpModel, MilpOptions, MilpStatus, Relation,
};

use crate::instance::{Topology, UcInstance};

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("subproblem finished with status {0:?}; is the schedule logic-feasible?")]
    Subproblem(LpStatus),
    #[error("commitment program finished with status {0:?}")]
    Commitment(MilpStatus),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CommitKind {
    U,
    V,
    W,
}

impl CommitKind {
    pub const ALL: [CommitKind; 3] = [CommitKind::U, CommitKind::V, CommitKind::W];

    fn offset(self) -> usize {
        self as usize
    }
}

/// Flat index of a commitment binary.
pub fn commit_index(inst: &UcInstance, kind: CommitKind, g: usize, t: usize) -> usize {
    let gt = inst.num_gens() * inst.horizon;
    kind.offset() * gt + g * inst.horizon + t
}

pub fn num_commit_vars(inst: &UcInstance) -> usize {
    3 * inst.num_gens() * inst.horizon
}

/// Result of checking a schedule against the commitment-only constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScheduleCheck {
    pub logic: bool,
    pub min_up: bool,
    pub min_down: bool,
}

impl ScheduleCheck {
    pub fn feasible(&self) -> bool {
        self.logic && self.min_up && self.min_down
    }
}

/// On/off, startup and shutdown decisions, indexed `[g][t]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CommitmentSchedule {
    pub u: Vec<Vec<bool>>,
    pub v: Vec<Vec<bool>>,
    pub w: Vec<Vec<bool>>,
}

impl CommitmentSchedule {
    /// Derives `v` and `w` from `u` and the initial states.
    pub fn from_commitment(inst: &UcInstance, u: Vec<Vec<bool>>) -> Self {
        let mut v = vec![vec![false; inst.horizon]; inst.num_gens()];
        let mut w = v.clone();
        for (g, gen) in inst.generators.iter().enumerate() {
            let mut prev = gen.initial_on;
            for t in 0..inst.horizon {
                v[g][t] = u[g][t] && !prev;
                w[g][t] = !u[g][t] && prev;
                prev = u[g][t];
            }
        }
        Self { u, v, w }
    }

    pub fn all_off(inst: &UcInstance) -> Self {
        Self::from_commitment(inst, vec![vec![false; inst.horizon]; inst.num_gens()])
    }

    pub fn all_on(inst: &UcInstance) -> Self {
        Self::from_commitment(inst, vec![vec![true; inst.horizon]; inst.num_gens()])
    }

    /// Keeps `u` and rebuilds `v`, `w` so the logic identity holds.
    pub fn repaired(&self, inst: &UcInstance) -> Self {
        Self::from_commitment(inst, self.u.clone())
    }

    /// Reads a flat commitment vector, rounding each entry at 0.5.
    pub fn from_vector(inst: &UcInstance, x: &[f64]) -> Self {
        let grid = |kind| {
            (0..inst.num_gens())
                .map(|g| {
                    (0..inst.horizon)
                        .map(|t| x[commit_index(inst, kind, g, t)] > 0.5)
                        .collect()
                })
                .collect()
        };
        Self {
            u: grid(CommitKind::U),
            v: grid(CommitKind::V),
            w: grid(CommitKind::W),
        }
    }

    pub fn to_vector(&self) -> Vec<f64> {
        [&self.u, &self.v, &self.w]
            .iter()
            .flat_map(|grid| grid.iter().flatten())
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn get(&self, kind: CommitKind, g: usize, t: usize) -> bool {
        match kind {
            CommitKind::U => self.u[g][t],
            CommitKind::V => self.v[g][t],
            CommitKind::W => self.w[g][t],
        }
    }

    /// Number of `u` entries that differ.
    pub fn hamming_u(&self, other: &Self) -> usize {
        self.u
            .iter()
            .flatten()
            .zip(other.u.iter().flatten())
            .filter(|(a, b)| a != b)
            .count()
    }

    pub fn flip_u(&mut self, inst: &UcInstance, g: usize, t: usize) {
        self.u[g][t] = !self.u[g][t];
        *self = self.repaired(inst);
    }

    pub fn check(&self, inst: &UcInstance) -> ScheduleCheck {
        let mut out = ScheduleCheck {
            logic: true,
            min_up: true,
            min_down: true,
        };
        for (g, gen) in inst.generators.iter().enumerate() {
            let mut prev = gen.initial_on;
            for t in 0..inst.horizon {
                let lhs = self.u[g][t] as i32 - prev as i32;
                if lhs != self.v[g][t] as i32 - self.w[g][t] as i32 {
                    out.logic = false;
                }
                prev = self.u[g][t];
                if t + 1 >= gen.t_minup {
                    let starts = (t + 1 - gen.t_minup..=t).filter(|&s| self.v[g][s]).count();
                    if starts > self.u[g][t] as usize {
                        out.min_up = false;
                    }
                }
                if t + 1 >= gen.t_mindn {
                    let stops = (t + 1 - gen.t_mindn..=t).filter(|&s| self.w[g][s]).count();
                    if stops > 1 - self.u[g][t] as usize {
                        out.min_down = false;
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for CommitmentSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (g, row) in self.u.iter().enumerate() {
            if g > 0 {
                f.write_str(" ")?;
            }
            for &b in row {
                f.write_str(if b { "1" } else { "0" })?;
            }
        }
        Ok(())
    }
}

/// `c1·u + c2·v + c3·w`.
pub fn commitment_cost(inst: &UcInstance, sched: &CommitmentSchedule) -> f64 {
    let mut cost = 0.0;
    for (g, gen) in inst.generators.iter().enumerate() {
        for t in 0..inst.horizon {
            if sched.u[g][t] {
                cost += gen.c1;
            }
            if sched.v[g][t] {
                cost += gen.c2;
            }
            if sched.w[g][t] {
                cost += gen.c3;
            }
        }
    }
    cost
}

/// Objective coefficients of the commitment binaries, flat-indexed.
pub fn commitment_cost_vector(inst: &UcInstance) -> Vec<f64> {
    let mut c = vec![0.0; num_commit_vars(inst)];
    for (g, gen) in inst.generators.iter().enumerate() {
        for t in 0..inst.horizon {
            c[commit_index(inst, CommitKind::U, g, t)] = gen.c1;
            c[commit_index(inst, CommitKind::V, g, t)] = gen.c2;
            c[commit_index(inst, CommitKind::W, g, t)] = gen.c3;
        }
    }
    c
}

/// Column positions of the dispatch variables.
#[derive(Debug, Clone)]
pub struct DispatchLayout {
    pub offset: usize,
    gens: usize,
    buses: usize,
    horizon: usize,
    /// Start of each generator's `α` block relative to `alpha0`.
    alpha_start: Vec<usize>,
    segments: Vec<usize>,
    p0: usize,
    alpha0: usize,
    r0: usize,
    theta0: usize,
    dplus0: usize,
    dminus0: usize,
    pub len: usize,
}

impl DispatchLayout {
    pub fn new(inst: &UcInstance, offset: usize) -> Self {
        let (gens, buses, horizon) = (inst.num_gens(), inst.num_buses(), inst.horizon);
        let segments: Vec<usize> = inst.generators.iter().map(|g| g.segments.len()).collect();
        let mut alpha_start = Vec::with_capacity(gens);
        let mut acc = 0;
        for &l in &segments {
            alpha_start.push(acc);
            acc += l * horizon;
        }
        let p0 = offset;
        let alpha0 = p0 + gens * horizon;
        let r0 = alpha0 + acc;
        let theta0 = r0 + gens * horizon;
        let dplus0 = theta0 + buses * horizon;
        let dminus0 = dplus0 + buses * horizon;
        let len = dminus0 + buses * horizon - offset;
        Self {
            offset,
            gens,
            buses,
            horizon,
            alpha_start,
            segments,
            p0,
            alpha0,
            r0,
            theta0,
            dplus0,
            dminus0,
            len,
        }
    }

    pub fn p(&self, g: usize, t: usize) -> usize {
        self.p0 + g * self.horizon + t
    }
    pub fn alpha(&self, g: usize, t: usize, l: usize) -> usize {
        self.alpha0 + self.alpha_start[g] + t * self.segments[g] + l
    }
    pub fn r(&self, g: usize, t: usize) -> usize {
        self.r0 + g * self.horizon + t
    }
    pub fn theta(&self, n: usize, t: usize) -> usize {
        self.theta0 + n * self.horizon + t
    }
    pub fn delta_plus(&self, n: usize, t: usize) -> usize {
        self.dplus0 + n * self.horizon + t
    }
    pub fn delta_minus(&self, n: usize, t: usize) -> usize {
        self.dminus0 + n * self.horizon + t
    }

    pub fn extract(&self, x: &[f64], cost: f64) -> DispatchSolution {
        let gt = |f: &dyn Fn(usize, usize) -> usize| -> Vec<Vec<f64>> {
            (0..self.gens)
                .map(|g| (0..self.horizon).map(|t| x[f(g, t)]).collect())
                .collect()
        };
        let nt = |f: &dyn Fn(usize, usize) -> usize| -> Vec<Vec<f64>> {
            (0..self.buses)
                .map(|n| (0..self.horizon).map(|t| x[f(n, t)]).collect())
                .collect()
        };
        DispatchSolution {
            p: gt(&|g, t| self.p(g, t)),
            alpha: (0..self.gens)
                .map(|g| {
                    (0..self.horizon)
                        .map(|t| (0..self.segments[g]).map(|l| x[self.alpha(g, t, l)]).collect())
                        .collect()
                })
                .collect(),
            theta: nt(&|n, t| self.theta(n, t)),
            r: gt(&|g, t| self.r(g, t)),
            delta_plus: nt(&|n, t| self.delta_plus(n, t)),
            delta_minus: nt(&|n, t| self.delta_minus(n, t)),
            cost,
        }
    }
}

/// Continuous half of a solution. Imbalance is reported per bus and step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispatchSolution {
    pub p: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<Vec<f64>>>,
    pub theta: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub delta_plus: Vec<Vec<f64>>,
    pub delta_minus: Vec<Vec<f64>>,
    /// Dispatch plus imbalance cost, $.
    pub cost: f64,
}

impl DispatchSolution {
    /// Total absolute imbalance, MW.
    pub fn imbalance(&self) -> f64 {
        let plus: f64 = self.delta_plus.iter().flatten().sum();
        let minus: f64 = self.delta_minus.iter().flatten().sum();
        plus - minus
    }
}

/// Dual group of a dispatch row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum DualGroup {
    /// `p − Σ (P^l − p̲) α^l = 0`
    Dispatch,
    /// `Σ α^l = u`
    Fraction,
    /// Nodal power balance.
    Balance,
    StartupRamp,
    ShutdownRamp,
    RampUp,
    RampDown,
    LineLimit,
}

impl DualGroup {
    pub const ALL: [DualGroup; 8] = [
        DualGroup::Dispatch,
        DualGroup::Fraction,
        DualGroup::Balance,
        DualGroup::StartupRamp,
        DualGroup::ShutdownRamp,
        DualGroup::RampUp,
        DualGroup::RampDown,
        DualGroup::LineLimit,
    ];

    /// Subscript of the multiplier family, 1 through 8.
    pub fn number(self) -> usize {
        self as usize + 1
    }
}

/// Row `coefs·x (relation) rhs_const + Σ commit_terms·(u,v,w)`.
#[derive(Debug, Clone)]
pub struct TaggedRow {
    pub group: DualGroup,
    pub coefs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs_const: f64,
    pub commit_terms: Vec<(usize, f64)>,
}

impl TaggedRow {
    pub fn rhs_at(&self, commit: &[f64]) -> f64 {
        self.rhs_const
            + self
                .commit_terms
                .iter()
                .map(|&(j, c)| c * commit[j])
                .sum::<f64>()
    }
}

/// Adds the dispatch columns to `lp` (which must already hold `layout.offset`
/// columns) and returns the tagged dispatch rows without adding them.
fn dispatch_block(inst: &UcInstance, topo: &Topology, layout: &DispatchLayout, lp: &mut LinearProgram) -> Vec<TaggedRow> {
    let (gens, buses, horizon) = (inst.num_gens(), inst.num_buses(), inst.horizon);
    assert_eq!(lp.num_vars(), layout.offset);
    for gen in &inst.generators {
        for t in 0..horizon {
            lp.add_var(0.0, gen.p_max[t] - gen.p_min[t], 0.0);
        }
    }
    for gen in &inst.generators {
        let base = gen.segments[0].c6;
        for _ in 0..horizon {
            for seg in &gen.segments {
                lp.add_var(0.0, f64::INFINITY, seg.c6 - base);
            }
        }
    }
    for _ in 0..gens * horizon {
        lp.add_var(0.0, f64::INFINITY, 0.0);
    }
    for n in 0..buses {
        for _ in 0..horizon {
            if n == topo.reference {
                lp.add_var(0.0, 0.0, 0.0);
            } else {
                lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0);
            }
        }
    }
    for _ in 0..buses {
        for t in 0..horizon {
            lp.add_var(0.0, f64::INFINITY, inst.penalty_cost[t]);
        }
    }
    for _ in 0..buses {
        for t in 0..horizon {
            lp.add_var(f64::NEG_INFINITY, 0.0, -inst.penalty_cost[t]);
        }
    }
    assert_eq!(lp.num_vars(), layout.offset + layout.len);

    let u = |g, t| commit_index(inst, CommitKind::U, g, t);
    let v = |g, t| commit_index(inst, CommitKind::V, g, t);
    let w = |g, t| commit_index(inst, CommitKind::W, g, t);
    let mut rows = Vec::new();
    let mut push = |group, coefs, relation, rhs_const, commit_terms| {
        rows.push(TaggedRow {
            group,
            coefs,
            relation,
            rhs_const,
            commit_terms,
        })
    };

    for (g, gen) in inst.generators.iter().enumerate() {
        for t in 0..horizon {
            let mut coefs = vec![(layout.p(g, t), 1.0)];
            for (l, seg) in gen.segments.iter().enumerate() {
                let span = seg.p_level - gen.p_min[t];
                if span != 0.0 {
                    coefs.push((layout.alpha(g, t, l), -span));
                }
            }
            push(DualGroup::Dispatch, coefs, Relation::Eq, 0.0, vec![]);
        }
    }
    for (g, gen) in inst.generators.iter().enumerate() {
        for t in 0..horizon {
            let coefs = (0..gen.segments.len()).map(|l| (layout.alpha(g, t, l), 1.0)).collect();
            push(DualGroup::Fraction, coefs, Relation::Eq, 0.0, vec![(u(g, t), 1.0)]);
        }
    }
    for n in 0..buses {
        for t in 0..horizon {
            let mut coefs = Vec::new();
            let mut commit = Vec::new();
            for (g, gen) in inst.generators.iter().enumerate() {
                if topo.gen_bus[g] == n {
                    coefs.push((layout.p(g, t), 1.0));
                    if gen.p_min[t] != 0.0 {
                        commit.push((u(g, t), -gen.p_min[t]));
                    }
                }
            }
            for &(a, b, sus, _) in &topo.lines {
                let other = if a == n {
                    b
                } else if b == n {
                    a
                } else {
                    continue;
                };
                coefs.push((layout.theta(n, t), -sus));
                coefs.push((layout.theta(other, t), sus));
            }
            coefs.push((layout.delta_plus(n, t), -1.0));
            coefs.push((layout.delta_minus(n, t), -1.0));
            push(DualGroup::Balance, coefs, Relation::Eq, inst.demand(n, t), commit);
        }
    }
    for (g, gen) in inst.generators.iter().enumerate() {
        for t in 0..horizon {
            let span = gen.p_max[t] - gen.p_min[t];
            let su = (gen.p_max[t] - gen.r_startup).max(0.0);
            let mut commit = vec![(u(g, t), span)];
            if su != 0.0 {
                commit.push((v(g, t), -su));
            }
            let coefs = vec![(layout.p(g, t), 1.0), (layout.r(g, t), 1.0)];
            push(DualGroup::StartupRamp, coefs, Relation::Le, 0.0, commit);
        }
    }
    for (g, gen) in inst.generators.iter().enumerate() {
        for t in 0..horizon.saturating_sub(1) {
            let span = gen.p_max[t] - gen.p_min[t];
            let sd = (gen.p_max[t] - gen.r_shutdown).max(0.0);
            let mut commit = vec![(u(g, t), span)];
            if sd != 0.0 {
                commit.push((w(g, t + 1), -sd));
            }
            let coefs = vec![(layout.p(g, t), 1.0), (layout.r(g, t), 1.0)];
            push(DualGroup::ShutdownRamp, coefs, Relation::Le, 0.0, commit);
        }
    }
    for (g, gen) in inst.generators.iter().enumerate() {
        for t in 1..horizon {
            let coefs = vec![
                (layout.p(g, t), 1.0),
                (layout.r(g, t), 1.0),
                (layout.p(g, t - 1), -1.0),
            ];
            push(DualGroup::RampUp, coefs, Relation::Le, gen.r_up, vec![]);
        }
    }
    for (g, gen) in inst.generators.iter().enumerate() {
        for t in 1..horizon {
            let coefs = vec![(layout.p(g, t - 1), 1.0), (layout.p(g, t), -1.0)];
            push(DualGroup::RampDown, coefs, Relation::Le, gen.r_down, vec![]);
        }
    }
    for &(a, b, sus, f_max) in &topo.lines {
        for t in 0..horizon {
            for sign in [1.0, -1.0] {
                let coefs = vec![(layout.theta(a, t), sign * sus), (layout.theta(b, t), -sign * sus)];
                push(DualGroup::LineLimit, coefs, Relation::Le, f_max, vec![]);
            }
        }
    }
    rows
}

/// Subproblem LP whose right-hand sides depend on the commitment.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub lp: LinearProgram,
    pub rows: Vec<TaggedRow>,
    pub layout: DispatchLayout,
}

impl Subproblem {
    /// Builds the rows once with `rhs = rhs_const`; call [`Subproblem::set_schedule`]
    /// or [`Subproblem::instantiate`] before solving.
    pub fn template(inst: &UcInstance) -> Self {
        let topo = inst.topology();
        let layout = DispatchLayout::new(inst, 0);
        let mut lp = LinearProgram::new();
        let rows = dispatch_block(inst, &topo, &layout, &mut lp);
        for row in &rows {
            lp.add_row(row.coefs.clone(), row.relation, row.rhs_const);
        }
        Self { lp, rows, layout }
    }

    pub fn set_schedule(&mut self, sched: &CommitmentSchedule) {
        let commit = sched.to_vector();
        for (lp_row, row) in self.lp.rows.iter_mut().zip(&self.rows) {
            lp_row.rhs = row.rhs_at(&commit);
        }
    }

    pub fn instantiate(&self, sched: &CommitmentSchedule) -> Self {
        let mut sp = self.clone();
        sp.set_schedule(sched);
        sp
    }

    pub fn groups(&self) -> impl Iterator<Item = DualGroup> + '_ {
        self.rows.iter().map(|r| r.group)
    }
}

/// Dispatch LP for a fixed schedule, each row tagged with its dual group.
pub fn build_subproblem(inst: &UcInstance, sched: &CommitmentSchedule) -> Subproblem {
    Subproblem::template(inst).instantiate(sched)
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub solution: LpSolution,
    pub dispatch: DispatchSolution,
    /// Recourse value `Q(u)`.
    pub value: f64,
    /// `c_pen·Σ|δ|`.
    pub penalty: f64,
}

/// Solves the subproblem for `sched`, warm starting from `warm` when given.
pub fn solve_subproblem(
    inst: &UcInstance,
    sp: &Subproblem,
    warm: Option<&Basis>,
) -> Result<SubproblemSolution, FormulationError> {
    let solution = match warm {
        Some(b) => solve_lp_warm(&sp.lp, b)?,
        None => solve_lp(&sp.lp)?,
    };
    finish_subproblem(inst, sp, solution)
}

/// [`solve_subproblem`] warm started from a basis factored once against the
/// shared subproblem matrix.
pub fn solve_subproblem_factored(
    inst: &UcInstance,
    sp: &Subproblem,
    warm: &FactoredBasis,
) -> Result<SubproblemSolution, FormulationError> {
    finish_subproblem(inst, sp, solve_lp_factored(&sp.lp, warm)?)
}

fn finish_subproblem(
    inst: &UcInstance,
    sp: &Subproblem,
    solution: LpSolution,
) -> Result<SubproblemSolution, FormulationError> {
    if !solution.is_optimal() {
        return Err(FormulationError::Subproblem(solution.status));
    }
    let dispatch = sp.layout.extract(&solution.x, solution.objective);
    let penalty = imbalance_cost(inst, &dispatch);
    Ok(SubproblemSolution {
        value: solution.objective,
        dispatch,
        penalty,
        solution,
    })
}

fn imbalance_cost(inst: &UcInstance, d: &DispatchSolution) -> f64 {
    let mut cost = 0.0;
    for n in 0..d.delta_plus.len() {
        for t in 0..inst.horizon {
            cost += inst.penalty_cost[t] * (d.delta_plus[n][t] - d.delta_minus[n][t]);
        }
    }
    cost
}

/// True objective of a schedule split into its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleCost {
    pub commitment: f64,
    /// Subproblem value `Q(u)` (dispatch plus imbalance).
    pub recourse: f64,
    pub penalty: f64,
    pub total: f64,
    pub check: ScheduleCheck,
}

impl ScheduleCost {
    /// Cost excluding imbalance penalties.
    pub fn generation(&self) -> f64 {
        self.total - self.penalty
    }
}

/// Commitment cost plus `Q(u)`. Schedules violating min-up/down still
/// evaluate; the violation is reported in `check`.
pub fn evaluate_schedule_cost(inst: &UcInstance, sched: &CommitmentSchedule) -> Result<ScheduleCost, FormulationError> {
    let sp = build_subproblem(inst, sched);
    let sol = solve_subproblem(inst, &sp, None)?;
    Ok(schedule_cost(inst, sched, &sol))
}

pub fn schedule_cost(inst: &UcInstance, sched: &CommitmentSchedule, sol: &SubproblemSolution) -> ScheduleCost {
    let commitment = commitment_cost(inst, sched);
    ScheduleCost {
        commitment,
        recourse: sol.value,
        penalty: sol.penalty,
        total: commitment + sol.value,
        check: sched.check(inst),
    }
}

/// Origin of a row in the full MILP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowKind {
    Dispatch(DualGroup),
    Logic { g: usize, t: usize },
    MinUp { g: usize, t: usize },
    MinDown { g: usize, t: usize },
    /// Extra rows appended by callers (for example a Hamming-ball limit).
    Extra,
}

#[derive(Debug, Clone)]
pub struct FullUcModel {
    pub model: MilpModel,
    pub layout: DispatchLayout,
    pub row_kinds: Vec<RowKind>,
}

impl FullUcModel {
    pub fn schedule(&self, inst: &UcInstance, x: &[f64]) -> CommitmentSchedule {
        CommitmentSchedule::from_vector(inst, x)
    }

    pub fn dispatch(&self, x: &[f64]) -> DispatchSolution {
        let cost = (self.layout.offset..self.layout.offset + self.layout.len)
            .map(|j| self.model.lp.objective[j] * x[j])
            .sum();
        self.layout.extract(x, cost)
    }

    /// Full-length point for a schedule and its dispatch, usable as an
    /// incumbent.
    pub fn point(&self, sched: &CommitmentSchedule, sp_x: &[f64]) -> Vec<f64> {
        let mut x = sched.to_vector();
        x.extend_from_slice(sp_x);
        x
    }

    pub fn add_row(&mut self, coefs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.model.lp.add_row(coefs, relation, rhs);
        self.row_kinds.push(RowKind::Extra);
    }
}

/// Appends the logic and min-up/down rows over the commitment block.
fn commitment_rows(inst: &UcInstance, lp: &mut LinearProgram, kinds: &mut Vec<RowKind>) {
    let idx = |k, g, t| commit_index(inst, k, g, t);
    for (g, gen) in inst.generators.iter().enumerate() {
        for t in 0..inst.horizon {
            let mut coefs = vec![(idx(CommitKind::U, g, t), 1.0)];
            let mut rhs = 0.0;
            if t == 0 {
                rhs = if gen.initial_on { 1.0 } else { 0.0 };
            } else {
                coefs.push((idx(CommitKind::U, g, t - 1), -1.0));
            }
            coefs.push((idx(CommitKind::V, g, t), -1.0));
            coefs.push((idx(CommitKind::W, g, t), 1.0));
            lp.add_row(coefs, Relation::Eq, rhs);
            kinds.push(RowKind::Logic { g, t });
        }
    }
    for (g, gen) in inst.generators.iter().enumerate() {
        for t in gen.t_minup.saturating_sub(1)..inst.horizon {
            let mut coefs: Vec<_> = (t + 1 - gen.t_minup..=t)
                .map(|s| (idx(CommitKind::V, g, s), 1.0))
                .collect();
            coefs.push((idx(CommitKind::U, g, t), -1.0));
            lp.add_row(coefs, Relation::Le, 0.0);
            kinds.push(RowKind::MinUp { g, t });
        }
        for t in gen.t_mindn.saturating_sub(1)..inst.horizon {
            let mut coefs: Vec<_> = (t + 1 - gen.t_mindn..=t)
                .map(|s| (idx(CommitKind::W, g, s), 1.0))
                .collect();
            coefs.push((idx(CommitKind::U, g, t), 1.0));
            lp.add_row(coefs, Relation::Le, 1.0);
            kinds.push(RowKind::MinDown { g, t });
        }
    }
}

/// The complete MILP: commitment costs and rows plus every dispatch row with
/// its commitment terms moved to the left-hand side.
pub fn build_full_uc(inst: &UcInstance) -> FullUcModel {
    let topo = inst.topology();
    let mut lp = LinearProgram::new();
    for c in commitment_cost_vector(inst) {
        lp.add_var(0.0, 1.0, c);
    }
    let n_commit = lp.num_vars();
    let layout = DispatchLayout::new(inst, n_commit);
    let rows = dispatch_block(inst, &topo, &layout, &mut lp);
    let mut kinds = Vec::new();
    commitment_rows(inst, &mut lp, &mut kinds);
    for row in rows {
        let mut coefs = row.coefs;
        coefs.extend(row.commit_terms.iter().map(|&(j, c)| (j, -c)));
        lp.add_row(coefs, row.relation, row.rhs_const);
        kinds.push(RowKind::Dispatch(row.group));
    }
    let mut model = MilpModel::new(lp);
    model.integers = (0..n_commit).collect();
    FullUcModel {
        model,
        layout,
        row_kinds: kinds,
    }
}

/// Affine function `coef·(u,v,w) + constant` of the commitment binaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommitAffine {
    pub coef: Vec<f64>,
    pub constant: f64,
}

impl CommitAffine {
    pub fn zero(n: usize) -> Self {
        Self {
            coef: vec![0.0; n],
            constant: 0.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.coef.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn eval_schedule(&self, sched: &CommitmentSchedule) -> f64 {
        self.eval(&sched.to_vector())
    }
}

/// Binary program over logic- and min-up/down-feasible commitments whose
/// objective is `sense · affine` (minimized). `sense = −1` maximizes.
fn commitment_program(inst: &UcInstance, affine: &CommitAffine, sense: f64) -> MilpModel {
    let mut lp = LinearProgram::new();
    for &c in &affine.coef {
        lp.add_var(0.0, 1.0, sense * c);
    }
    commitment_rows(inst, &mut lp, &mut Vec::new());
    let mut model = MilpModel::new(lp);
    model.integers = (0..affine.coef.len()).collect();
    model
}

/// Maximizes a cut's left-hand side over feasible commitments. The optimum
/// of the model plus `affine.constant` is the bound η*.
pub fn build_max_eta(inst: &UcInstance, affine: &CommitAffine) -> MilpModel {
    commitment_program(inst, affine, -1.0)
}

fn optimize_affine(inst: &UcInstance, affine: &CommitAffine, sense: f64) -> Result<f64, FormulationError> {
    let model = commitment_program(inst, affine, sense);
    let sol = solve_milp(&model, &MilpOptions::default())?;
    if sol.status != MilpStatus::Optimal {
        return Err(FormulationError::Commitment(sol.status));
    }
    let sched = CommitmentSchedule::from_vector(inst, &sol.x);
    Ok(affine.eval_schedule(&sched))
}

/// `max affine(s)` over feasible commitments `s`.
pub fn max_affine(inst: &UcInstance, affine: &CommitAffine) -> Result<f64, FormulationError> {
    optimize_affine(inst, affine, -1.0)
}

/// `min affine(s)` over feasible commitments `s`.
pub fn min_affine(inst: &UcInstance, affine: &CommitAffine) -> Result<f64, FormulationError> {
    optimize_affine(inst, affine, 1.0)
}
