//! QUBO models, Benders cut extraction and rounding, and the master-problem
//! QUBO with dynamically sized binary registers.
//!
//! A [`Qubo`] keeps its squared-penalty groups unexpanded: energy is
//! `offset + Σ hᵢxᵢ + Σ Jᵢⱼxᵢxⱼ + Σ_blocks w·(c + Σ aᵢxᵢ)²`. Block
//! coefficients are integers in the master problem, so residuals are exact in
//! `f64` and feasible assignments carry no rounding noise. [`Qubo::expanded`]
//! produces the plain quadratic form for external samplers.
//!
//! Cut arithmetic is done in integer multiples of a resolution: 1 when
//! rounding is on, `10^-p` otherwise.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;
use uc_milp::LpSolution;

use crate::formulation::{
    commit_index, max_affine, min_affine, num_commit_vars, CommitAffine, CommitKind, CommitmentSchedule, DualGroup,
    FormulationError, Subproblem,
};
use crate::instance::UcInstance;

#[derive(Debug, Error)]
pub enum QuboError {
    #[error("subproblem solution has {got} duals for {expected} tagged rows")]
    MissingDuals { expected: usize, got: usize },
    #[error("cut has {got} coefficients, instance has {expected} commitment binaries")]
    CutDimension { expected: usize, got: usize },
    #[error("duplicate qubo variable {0}")]
    DuplicateVar(String),
    #[error("non-finite coefficient on {0}")]
    NonFinite(String),
    #[error("penalty weights must be positive")]
    Penalty,
    #[error("bit vector has length {got}, qubo has {expected} variables")]
    BitLength { expected: usize, got: usize },
    #[error("qubo text line {line}: {message}")]
    Text { line: usize, message: String },
    #[error(transparent)]
    Formulation(#[from] FormulationError),
}

/// Role of a QUBO variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum VarKind {
    Commit { kind: CommitKind, g: usize, t: usize },
    MinUpSlack { g: usize, t: usize },
    MinDownSlack { g: usize, t: usize },
    EtaBit(usize),
    CutSlackBit { cut: usize, bit: usize },
    /// Variable with no master-problem meaning (generic QUBOs).
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum PenaltyGroup {
    /// Startup/shutdown logic.
    P1,
    /// Minimum up time.
    P2,
    /// Minimum down time.
    P3,
    /// Optimality cuts.
    P4,
}

/// `weight · (constant + Σ coef·x)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyBlock {
    pub group: PenaltyGroup,
    pub weight: f64,
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl PenaltyBlock {
    pub fn residual(&self, bits: &[u8]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .filter(|&&(i, _)| bits[i] != 0)
                .map(|&(_, c)| c)
                .sum::<f64>()
    }

    pub fn energy(&self, bits: &[u8]) -> f64 {
        let r = self.residual(bits);
        self.weight * r * r
    }
}

#[derive(Debug, Clone, Default)]
pub struct Qubo {
    names: Vec<String>,
    kinds: Vec<VarKind>,
    index: HashMap<String, usize>,
    linear: Vec<f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    offset: f64,
    blocks: Vec<PenaltyBlock>,
}

impl Qubo {
    pub fn new() -> Self {
        Self::default()
    }

    /// Generic QUBO with `n` anonymous variables `x0…x{n-1}`.
    pub fn with_vars(n: usize) -> Self {
        let mut q = Self::new();
        for i in 0..n {
            q.add_var(&format!("x{i}"), VarKind::Plain).expect("fresh names");
        }
        q
    }

    pub fn add_var(&mut self, name: &str, kind: VarKind) -> Result<usize, QuboError> {
        if self.index.contains_key(name) {
            return Err(QuboError::DuplicateVar(name.to_string()));
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.kinds.push(kind);
        self.index.insert(name.to_string(), i);
        self.linear.push(0.0);
        Ok(i)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn kind(&self, i: usize) -> VarKind {
        self.kinds[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn add_linear(&mut self, i: usize, c: f64) {
        self.linear[i] += c;
    }

    /// Adds `c·xᵢxⱼ`; the diagonal folds into the linear term.
    pub fn add_quadratic(&mut self, i: usize, j: usize, c: f64) {
        if i == j {
            self.linear[i] += c;
        } else {
            *self.quadratic.entry((i.min(j), i.max(j))).or_insert(0.0) += c;
        }
    }

    pub fn add_offset(&mut self, c: f64) {
        self.offset += c;
    }

    pub fn add_penalty(&mut self, group: PenaltyGroup, weight: f64, constant: f64, terms: Vec<(usize, f64)>) {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, c) in terms {
            *merged.entry(i).or_insert(0.0) += c;
        }
        self.blocks.push(PenaltyBlock {
            group,
            weight,
            constant,
            terms: merged.into_iter().filter(|&(_, c)| c != 0.0).collect(),
        });
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.quadratic
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn blocks(&self) -> &[PenaltyBlock] {
        &self.blocks
    }

    pub fn validate(&self) -> Result<(), QuboError> {
        for (i, h) in self.linear.iter().enumerate() {
            if !h.is_finite() {
                return Err(QuboError::NonFinite(self.names[i].clone()));
            }
        }
        for (&(i, j), c) in &self.quadratic {
            if !c.is_finite() {
                return Err(QuboError::NonFinite(format!("{}*{}", self.names[i], self.names[j])));
            }
        }
        for b in &self.blocks {
            if !(b.weight.is_finite() && b.constant.is_finite()) || b.terms.iter().any(|(_, c)| !c.is_finite()) {
                return Err(QuboError::NonFinite(format!("{:?} block", b.group)));
            }
        }
        if !self.offset.is_finite() {
            return Err(QuboError::NonFinite("offset".into()));
        }
        Ok(())
    }

    /// Energy without penalty blocks.
    pub fn plain_energy(&self, bits: &[u8]) -> f64 {
        let mut e = self.offset;
        for (i, &h) in self.linear.iter().enumerate() {
            if bits[i] != 0 {
                e += h;
            }
        }
        for (&(i, j), &c) in &self.quadratic {
            if bits[i] != 0 && bits[j] != 0 {
                e += c;
            }
        }
        e
    }

    pub fn energy(&self, bits: &[u8]) -> f64 {
        assert_eq!(bits.len(), self.len(), "bit vector length");
        self.plain_energy(bits) + self.blocks.iter().map(|b| b.energy(bits)).sum::<f64>()
    }

    /// Penalty energy per group.
    pub fn penalty_energy(&self, bits: &[u8]) -> BTreeMap<PenaltyGroup, f64> {
        let mut out = BTreeMap::new();
        for b in &self.blocks {
            *out.entry(b.group).or_insert(0.0) += b.energy(bits);
        }
        out
    }

    /// The same function with every penalty block multiplied out.
    pub fn expanded(&self) -> Qubo {
        let mut q = Qubo {
            names: self.names.clone(),
            kinds: self.kinds.clone(),
            index: self.index.clone(),
            linear: self.linear.clone(),
            quadratic: self.quadratic.clone(),
            offset: self.offset,
            blocks: Vec::new(),
        };
        for b in &self.blocks {
            let w = b.weight;
            q.offset += w * b.constant * b.constant;
            for (k, &(i, ci)) in b.terms.iter().enumerate() {
                q.linear[i] += w * (ci * ci + 2.0 * b.constant * ci);
                for &(j, cj) in &b.terms[k + 1..] {
                    q.add_quadratic(i, j, 2.0 * w * ci * cj);
                }
            }
        }
        q.quadratic.retain(|_, c| *c != 0.0);
        q
    }

    /// Sparse text form of the expanded QUBO.
    ///
    /// ```text
    /// # comments start with '#'
    /// qubo <num_vars> <offset>
    /// <i> <i> <linear coefficient>
    /// <i> <j> <quadratic coefficient>   (i < j)
    /// ```
    pub fn to_text(&self) -> String {
        let q = self.expanded();
        let mut s = String::new();
        let _ = writeln!(s, "qubo {} {:e}", q.len(), q.offset);
        for (i, &h) in q.linear.iter().enumerate() {
            if h != 0.0 {
                let _ = writeln!(s, "{i} {i} {h:e}");
            }
        }
        for (&(i, j), &c) in &q.quadratic {
            let _ = writeln!(s, "{i} {j} {c:e}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Qubo, QuboError> {
        let err = |line: usize, message: &str| QuboError::Text {
            line,
            message: message.to_string(),
        };
        let mut q: Option<Qubo> = None;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            match (&mut q, parts.as_slice()) {
                (None, ["qubo", n, off]) => {
                    let n: usize = n.parse().map_err(|_| err(ln + 1, "bad variable count"))?;
                    let off: f64 = off.parse().map_err(|_| err(ln + 1, "bad offset"))?;
                    let mut fresh = Qubo::with_vars(n);
                    fresh.offset = off;
                    q = Some(fresh);
                }
                (None, _) => return Err(err(ln + 1, "expected header 'qubo <n> <offset>'")),
                (Some(q), [i, j, c]) => {
                    let i: usize = i.parse().map_err(|_| err(ln + 1, "bad index"))?;
                    let j: usize = j.parse().map_err(|_| err(ln + 1, "bad index"))?;
                    let c: f64 = c.parse().map_err(|_| err(ln + 1, "bad coefficient"))?;
                    if i >= q.len() || j >= q.len() {
                        return Err(err(ln + 1, "index out of range"));
                    }
                    q.add_quadratic(i, j, c);
                }
                (Some(_), _) => return Err(err(ln + 1, "expected '<i> <j> <coefficient>'")),
            }
        }
        q.ok_or_else(|| err(0, "missing header"))
    }
}

/// Smallest `b` with `2^b ≥ x + 1` for a non-negative integer `x`.
fn bits_for(x: u64) -> usize {
    (u64::BITS - x.leading_zeros()) as usize
}

/// Register width for a bound: `⌈log₂(η*+1)⌉` when `rounded`, else
/// `⌈log₂(η*·10^p+1)⌉`. Products within floating noise of an integer are
/// snapped to it first.
pub fn eta_encoding_width(eta_star: f64, precision: u32, rounded: bool) -> usize {
    assert!(eta_star >= 0.0 && eta_star.is_finite(), "eta_star must be finite and non-negative");
    let x = if rounded {
        eta_star
    } else {
        eta_star * 10f64.powi(precision as i32)
    };
    let near = x.round();
    let x = if (x - near).abs() <= 1e-9 * near.max(1.0) { near } else { x.ceil() };
    bits_for(x as u64)
}

/// How cut coefficients and registers are discretized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutEncoding {
    pub rounded: bool,
    pub precision: u32,
}

impl CutEncoding {
    /// Value of one register unit in $.
    pub fn resolution(&self) -> f64 {
        if self.rounded {
            1.0
        } else {
            10f64.powi(-(self.precision as i32))
        }
    }
}

/// Cut straight from subproblem duals, before any rounding.
#[derive(Debug, Clone, Serialize)]
pub struct RawCut {
    /// `η ≥ affine(u, v, w)`.
    pub affine: CommitAffine,
    /// Row duals grouped by family, in row order.
    pub duals: BTreeMap<DualGroup, Vec<f64>>,
}

/// Assembles `η ≥ a·(u,v,w) + b` from an optimal subproblem solution.
///
/// Each row contributes `y·(rhs_const + commit_terms)`; reduced costs of
/// columns resting on constant bounds fold into `b`.
pub fn extract_raw_cut(inst: &UcInstance, sp: &Subproblem, sol: &LpSolution) -> Result<RawCut, QuboError> {
    if sol.duals.len() != sp.rows.len() {
        return Err(QuboError::MissingDuals {
            expected: sp.rows.len(),
            got: sol.duals.len(),
        });
    }
    let mut affine = CommitAffine::zero(num_commit_vars(inst));
    let mut duals: BTreeMap<DualGroup, Vec<f64>> = BTreeMap::new();
    for (row, &y) in sp.rows.iter().zip(&sol.duals) {
        duals.entry(row.group).or_default().push(y);
        if y == 0.0 {
            continue;
        }
        affine.constant += y * row.rhs_const;
        for &(j, c) in &row.commit_terms {
            affine.coef[j] += y * c;
        }
    }
    for (j, &d) in sol.reduced_costs.iter().enumerate() {
        if d != 0.0 {
            affine.constant += d * sol.x[j];
        }
    }
    Ok(RawCut { affine, duals })
}

/// Rounds a cut to integer multiples of `resolution` so that the result never
/// exceeds the original at any binary point.
///
/// Positive coefficients round down and negative ones round up. Rounding a
/// negative coefficient up can raise the left-hand side by its fractional
/// part, so those parts are taken off the constant before it is rounded down.
pub fn round_to_units(raw: &CommitAffine, resolution: f64) -> (Vec<i64>, i64) {
    let mut lift = 0.0;
    let coef = raw
        .coef
        .iter()
        .map(|&a| {
            let q = a / resolution;
            if q > 0.0 {
                q.floor() as i64
            } else if q < 0.0 {
                let k = q.ceil();
                lift += k - q;
                k as i64
            } else {
                0
            }
        })
        .collect();
    let constant = (raw.constant / resolution - lift).floor() as i64;
    (coef, constant)
}

/// Integer rounding of a raw cut (unit resolution).
pub fn round_cut(raw: &CommitAffine) -> CommitAffine {
    let (coef, constant) = round_to_units(raw, 1.0);
    CommitAffine {
        coef: coef.into_iter().map(|k| k as f64).collect(),
        constant: constant as f64,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BendersCut {
    pub duals: BTreeMap<DualGroup, Vec<f64>>,
    pub raw: CommitAffine,
    /// Encoded cut in $: `units · resolution`.
    pub rounded: CommitAffine,
    pub encoding: CutEncoding,
    /// Encoded coefficients in register units.
    pub units: Vec<i64>,
    pub constant_units: i64,
    /// `max(0, max_s rounded(s))` over feasible commitments, in $.
    pub eta_star: f64,
    pub eta_star_units: i64,
    /// `min_s rounded(s)` over feasible commitments, in units.
    pub lhs_floor_units: i64,
    /// `⌈log₂(η*+1)⌉`.
    pub bits_rounded: usize,
    /// `⌈log₂(η*·10^p+1)⌉`.
    pub bits_unrounded: usize,
}

impl BendersCut {
    pub fn new(inst: &UcInstance, raw: RawCut, encoding: CutEncoding) -> Result<Self, QuboError> {
        let expected = num_commit_vars(inst);
        if raw.affine.coef.len() != expected {
            return Err(QuboError::CutDimension {
                expected,
                got: raw.affine.coef.len(),
            });
        }
        let res = encoding.resolution();
        let (units, constant_units) = round_to_units(&raw.affine, res);
        let unit_affine = CommitAffine {
            coef: units.iter().map(|&k| k as f64).collect(),
            constant: constant_units as f64,
        };
        let max_units = max_affine(inst, &unit_affine)?.round() as i64;
        let min_units = min_affine(inst, &unit_affine)?.round() as i64;
        let eta_star_units = max_units.max(0);
        let eta_star = eta_star_units as f64 * res;
        Ok(Self {
            duals: raw.duals,
            rounded: CommitAffine {
                coef: units.iter().map(|&k| k as f64 * res).collect(),
                constant: constant_units as f64 * res,
            },
            raw: raw.affine,
            encoding,
            units,
            constant_units,
            eta_star,
            eta_star_units,
            lhs_floor_units: min_units,
            bits_rounded: eta_encoding_width(eta_star, encoding.precision, true),
            bits_unrounded: eta_encoding_width(eta_star, encoding.precision, false),
        })
    }

    /// Width implied by this cut's own η* under its encoding.
    pub fn bits(&self) -> usize {
        if self.encoding.rounded {
            self.bits_rounded
        } else {
            self.bits_unrounded
        }
    }

    /// Coefficients on `u`, `v` or `w` as a flat `[g·T + t]` slice.
    pub fn raw_coefficients(&self, inst: &UcInstance, kind: CommitKind) -> &[f64] {
        let gt = inst.num_gens() * inst.horizon;
        let start = commit_index(inst, kind, 0, 0);
        &self.raw.coef[start..start + gt]
    }

    /// Encoded left-hand side in units at a commitment point.
    pub fn lhs_units(&self, sched: &CommitmentSchedule) -> i64 {
        self.units
            .iter()
            .zip(sched.to_vector())
            .filter(|(_, x)| *x > 0.5)
            .map(|(k, _)| k)
            .sum::<i64>()
            + self.constant_units
    }
}

/// Binary register for η.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaEncoding {
    pub bits: usize,
    pub resolution: f64,
}

impl EtaEncoding {
    /// Register wide enough for the largest η* across `cuts`.
    pub fn for_cuts(cuts: &[BendersCut], encoding: CutEncoding) -> Self {
        let cap = cuts.iter().map(|c| c.eta_star).fold(0.0, f64::max);
        Self {
            bits: eta_encoding_width(cap, encoding.precision, encoding.rounded),
            resolution: encoding.resolution(),
        }
    }

    pub fn max_units(&self) -> u64 {
        if self.bits == 0 {
            0
        } else {
            (1u64 << self.bits) - 1
        }
    }

    pub fn decode(&self, bits: &[u8]) -> u64 {
        bits.iter()
            .enumerate()
            .filter(|(_, &b)| b != 0)
            .map(|(k, _)| 1u64 << k)
            .sum()
    }

    pub fn encode(&self, value: u64) -> Vec<u8> {
        (0..self.bits).map(|k| ((value >> k) & 1) as u8).collect()
    }

    pub fn value(&self, units: u64) -> f64 {
        units as f64 * self.resolution
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Penalties {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
}

impl Penalties {
    /// Twice an upper bound on the master objective:
    /// `2·(Σ (c1 + c2 + c3)·T + 2^bits·resolution)`.
    pub fn sized(inst: &UcInstance, eta: EtaEncoding) -> Self {
        let commit: f64 = inst
            .generators
            .iter()
            .map(|g| (g.c1.abs() + g.c2.abs() + g.c3.abs()) * inst.horizon as f64)
            .sum();
        let bound = commit + 2f64.powi(eta.bits as i32) * eta.resolution;
        let p = 2.0 * bound;
        Self { p1: p, p2: p, p3: p, p4: p }
    }

    fn validate(&self) -> Result<(), QuboError> {
        if [self.p1, self.p2, self.p3, self.p4].iter().all(|p| *p > 0.0 && p.is_finite()) {
            Ok(())
        } else {
            Err(QuboError::Penalty)
        }
    }
}

/// Where each register lives in a master QUBO.
#[derive(Debug, Clone)]
pub struct MasterLayout {
    pub num_commit: usize,
    pub min_up_slack: Vec<usize>,
    pub min_down_slack: Vec<usize>,
    pub eta: EtaEncoding,
    pub eta_start: usize,
    /// `(first bit, width)` of each cut's slack register.
    pub cut_slack: Vec<(usize, usize)>,
}

impl MasterLayout {
    pub fn eta_bits(&self) -> std::ops::Range<usize> {
        self.eta_start..self.eta_start + self.eta.bits
    }

    pub fn total_slack_bits(&self) -> usize {
        self.cut_slack.iter().map(|&(_, w)| w).sum()
    }
}

#[derive(Debug, Clone)]
pub struct MasterQubo {
    pub qubo: Qubo,
    pub layout: MasterLayout,
    pub penalties: Penalties,
}

/// Slack width for a cut so `s₃ = η − LHS` is representable for every
/// `η ≤ η_cap` and every feasible commitment.
fn cut_slack_width(cut: &BendersCut, eta_cap_units: u64) -> usize {
    let span = eta_cap_units as i64 - cut.lhs_floor_units.min(eta_cap_units as i64);
    bits_for(span.max(0) as u64)
}

/// Master problem as a QUBO: commitment costs plus η, with squared penalties
/// for startup/shutdown logic (P1), minimum up (P2) and down (P3) times, and
/// one block per cut enforcing `LHS + s₃ = η` (P4).
pub fn build_master_qubo(
    inst: &UcInstance,
    cuts: &[BendersCut],
    penalties: Penalties,
    eta: EtaEncoding,
) -> Result<MasterQubo, QuboError> {
    penalties.validate()?;
    let n_commit = num_commit_vars(inst);
    for c in cuts {
        if c.units.len() != n_commit {
            return Err(QuboError::CutDimension {
                expected: n_commit,
                got: c.units.len(),
            });
        }
    }
    let mut q = Qubo::new();
    for kind in CommitKind::ALL {
        let tag = match kind {
            CommitKind::U => "u",
            CommitKind::V => "v",
            CommitKind::W => "w",
        };
        for (g, gen) in inst.generators.iter().enumerate() {
            for t in 0..inst.horizon {
                let i = q.add_var(&format!("{tag}[{}][{t}]", gen.id), VarKind::Commit { kind, g, t })?;
                debug_assert_eq!(i, commit_index(inst, kind, g, t));
                let c = match kind {
                    CommitKind::U => gen.c1,
                    CommitKind::V => gen.c2,
                    CommitKind::W => gen.c3,
                };
                q.add_linear(i, c);
            }
        }
    }
    let idx = |k, g, t| commit_index(inst, k, g, t);

    for (g, gen) in inst.generators.iter().enumerate() {
        for t in 0..inst.horizon {
            let mut terms = vec![
                (idx(CommitKind::U, g, t), 1.0),
                (idx(CommitKind::V, g, t), -1.0),
                (idx(CommitKind::W, g, t), 1.0),
            ];
            let constant = if t == 0 {
                -(gen.initial_on as u8 as f64)
            } else {
                terms.push((idx(CommitKind::U, g, t - 1), -1.0));
                0.0
            };
            q.add_penalty(PenaltyGroup::P1, penalties.p1, constant, terms);
        }
    }

    let mut min_up_slack = Vec::new();
    let mut min_down_slack = Vec::new();
    for (g, gen) in inst.generators.iter().enumerate() {
        for t in gen.t_minup.saturating_sub(1)..inst.horizon {
            let s = q.add_var(&format!("s1[{}][{t}]", gen.id), VarKind::MinUpSlack { g, t })?;
            min_up_slack.push(s);
            let mut terms: Vec<_> = (t + 1 - gen.t_minup..=t).map(|r| (idx(CommitKind::V, g, r), 1.0)).collect();
            terms.push((s, 1.0));
            terms.push((idx(CommitKind::U, g, t), -1.0));
            q.add_penalty(PenaltyGroup::P2, penalties.p2, 0.0, terms);
        }
        for t in gen.t_mindn.saturating_sub(1)..inst.horizon {
            let s = q.add_var(&format!("s2[{}][{t}]", gen.id), VarKind::MinDownSlack { g, t })?;
            min_down_slack.push(s);
            let mut terms: Vec<_> = (t + 1 - gen.t_mindn..=t).map(|r| (idx(CommitKind::W, g, r), 1.0)).collect();
            terms.push((s, 1.0));
            terms.push((idx(CommitKind::U, g, t), 1.0));
            q.add_penalty(PenaltyGroup::P3, penalties.p3, -1.0, terms);
        }
    }

    let eta_start = q.len();
    for k in 0..eta.bits {
        let i = q.add_var(&format!("eta[{k}]"), VarKind::EtaBit(k))?;
        q.add_linear(i, 2f64.powi(k as i32) * eta.resolution);
    }

    let mut cut_slack = Vec::with_capacity(cuts.len());
    let res2 = eta.resolution * eta.resolution;
    for (c, cut) in cuts.iter().enumerate() {
        let width = cut_slack_width(cut, eta.max_units());
        let start = q.len();
        for k in 0..width {
            q.add_var(&format!("s3[{c}][{k}]"), VarKind::CutSlackBit { cut: c, bit: k })?;
        }
        cut_slack.push((start, width));
        let mut terms: Vec<(usize, f64)> = cut
            .units
            .iter()
            .enumerate()
            .filter(|(_, &k)| k != 0)
            .map(|(j, &k)| (j, k as f64))
            .collect();
        for k in 0..eta.bits {
            terms.push((eta_start + k, -(2f64.powi(k as i32))));
        }
        for k in 0..width {
            terms.push((start + k, 2f64.powi(k as i32)));
        }
        q.add_penalty(PenaltyGroup::P4, penalties.p4 * res2, cut.constant_units as f64, terms);
    }
    q.validate()?;
    Ok(MasterQubo {
        qubo: q,
        layout: MasterLayout {
            num_commit: n_commit,
            min_up_slack,
            min_down_slack,
            eta,
            eta_start,
            cut_slack,
        },
        penalties,
    })
}

/// Squared residuals of the penalty groups at one assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residuals {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    /// One squared residual per cut, in $².
    pub p4: Vec<f64>,
}

impl Residuals {
    pub fn commitment_clean(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0 && self.p3 == 0.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecodedSample {
    /// Commitment bits exactly as sampled (may break the logic identity).
    pub schedule: CommitmentSchedule,
    pub eta: f64,
    pub min_up_slack: Vec<u8>,
    pub min_down_slack: Vec<u8>,
    /// Slack register values in $.
    pub cut_slack: Vec<f64>,
    pub residuals: Residuals,
    /// `c1·u + c2·v + c3·w + η`.
    pub objective: f64,
}

pub fn decode_sample(inst: &UcInstance, mq: &MasterQubo, bits: &[u8]) -> Result<DecodedSample, QuboError> {
    let q = &mq.qubo;
    if bits.len() != q.len() {
        return Err(QuboError::BitLength {
            expected: q.len(),
            got: bits.len(),
        });
    }
    let l = &mq.layout;
    let commit: Vec<f64> = bits[..l.num_commit].iter().map(|&b| b as f64).collect();
    let schedule = CommitmentSchedule::from_vector(inst, &commit);
    let eta_units = l.eta.decode(&bits[l.eta_bits()]);
    let eta = l.eta.value(eta_units);
    let cut_slack = l
        .cut_slack
        .iter()
        .map(|&(s, w)| l.eta.value(l.eta.decode(&bits[s..s + w])))
        .collect();
    let mut res = Residuals {
        p1: 0.0,
        p2: 0.0,
        p3: 0.0,
        p4: Vec::new(),
    };
    for b in q.blocks() {
        let r = b.residual(bits);
        match b.group {
            PenaltyGroup::P1 => res.p1 += r * r,
            PenaltyGroup::P2 => res.p2 += r * r,
            PenaltyGroup::P3 => res.p3 += r * r,
            PenaltyGroup::P4 => {
                let r = r * l.eta.resolution;
                res.p4.push(r * r)
            }
        }
    }
    Ok(DecodedSample {
        objective: q.plain_energy(bits),
        schedule,
        eta,
        min_up_slack: l.min_up_slack.iter().map(|&i| bits[i]).collect(),
        min_down_slack: l.min_down_slack.iter().map(|&i| bits[i]).collect(),
        cut_slack,
        residuals: res,
    })
}

/// Bit vector for a schedule with every slack and η set to satisfy all
/// penalty blocks when possible.
pub fn encode_assignment(inst: &UcInstance, mq: &MasterQubo, sched: &CommitmentSchedule, cuts: &[BendersCut]) -> Vec<u8> {
    let l = &mq.layout;
    let mut bits = vec![0u8; mq.qubo.len()];
    for (j, x) in sched.to_vector().into_iter().enumerate() {
        bits[j] = (x > 0.5) as u8;
    }
    for &i in &l.min_up_slack {
        if let VarKind::MinUpSlack { g, t } = mq.qubo.kind(i) {
            let gen = &inst.generators[g];
            let starts = (t + 1 - gen.t_minup..=t).filter(|&r| sched.v[g][r]).count() as i64;
            bits[i] = (sched.u[g][t] as i64 - starts == 1) as u8;
        }
    }
    for &i in &l.min_down_slack {
        if let VarKind::MinDownSlack { g, t } = mq.qubo.kind(i) {
            let gen = &inst.generators[g];
            let stops = (t + 1 - gen.t_mindn..=t).filter(|&r| sched.w[g][r]).count() as i64;
            bits[i] = (1 - sched.u[g][t] as i64 - stops == 1) as u8;
        }
    }
    let lhs: Vec<i64> = cuts.iter().map(|c| c.lhs_units(sched)).collect();
    let eta = lhs.iter().copied().max().unwrap_or(0).clamp(0, l.eta.max_units() as i64) as u64;
    for (k, b) in l.eta.encode(eta).into_iter().enumerate() {
        bits[l.eta_start + k] = b;
    }
    for (c, &(start, width)) in l.cut_slack.iter().enumerate() {
        let cap = if width == 0 { 0 } else { (1i64 << width) - 1 };
        let s = (eta as i64 - lhs[c]).clamp(0, cap) as u64;
        for k in 0..width {
            bits[start + k] = ((s >> k) & 1) as u8;
        }
    }
    bits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{build_subproblem, solve_subproblem};
    use crate::instance::synth_instance;

    #[test]
    fn rounding_example() {
        let raw = CommitAffine {
            coef: vec![2.7, -2.7],
            constant: 3.9,
        };
        let r = round_cut(&raw);
        assert_eq!(r.coef, vec![2.0, -2.0]);
        assert_eq!(r.constant, 3.0);
    }

    #[test]
    fn integer_cut_unchanged() {
        let raw = CommitAffine {
            coef: vec![4.0, -3.0, 0.0],
            constant: -7.0,
        };
        assert_eq!(round_cut(&raw), raw);
    }

    #[test]
    fn negative_fraction_lowers_constant() {
        let raw = CommitAffine {
            coef: vec![-2.7],
            constant: 3.0,
        };
        let r = round_cut(&raw);
        assert_eq!(r.coef, vec![-2.0]);
        assert!(r.eval(&[1.0]) <= raw.eval(&[1.0]));
        assert!(r.eval(&[0.0]) <= raw.eval(&[0.0]));
    }

    #[test]
    fn width_examples() {
        assert_eq!(eta_encoding_width(100.0, 2, false), 14);
        assert_eq!(eta_encoding_width(100.0, 2, true), 7);
        assert_eq!(eta_encoding_width(0.0, 2, false), 0);
        assert_eq!(eta_encoding_width(0.0, 2, true), 0);
        assert_eq!(eta_encoding_width(1.0, 0, true), 1);
        assert_eq!(eta_encoding_width(1.0, 2, true), 1);
        // 2^3 - 1 fits in 3 bits, 2^3 needs 4
        assert_eq!(eta_encoding_width(7.0, 0, true), 3);
        assert_eq!(eta_encoding_width(8.0, 0, true), 4);
        assert_eq!(eta_encoding_width(0.07, 2, false), 3);
    }

    #[test]
    fn eta_register_round_trip() {
        let enc = EtaEncoding { bits: 6, resolution: 1.0 };
        for k in 0..=enc.max_units() {
            assert_eq!(enc.decode(&enc.encode(k)), k);
        }
    }

    #[test]
    fn zero_duals_give_zero_cut() {
        let inst = synth_instance(2, 2, 2, 1);
        let sp = build_subproblem(&inst, &CommitmentSchedule::all_on(&inst));
        let mut sol = solve_subproblem(&inst, &sp, None).unwrap().solution;
        sol.duals.iter_mut().for_each(|y| *y = 0.0);
        sol.reduced_costs.iter_mut().for_each(|d| *d = 0.0);
        let cut = extract_raw_cut(&inst, &sp, &sol).unwrap();
        assert!(cut.affine.coef.iter().all(|&a| a == 0.0));
        assert_eq!(cut.affine.constant, 0.0);
    }

    #[test]
    fn missing_duals_rejected() {
        let inst = synth_instance(1, 1, 1, 0);
        let sp = build_subproblem(&inst, &CommitmentSchedule::all_on(&inst));
        let mut sol = solve_subproblem(&inst, &sp, None).unwrap().solution;
        sol.duals.pop();
        assert!(matches!(
            extract_raw_cut(&inst, &sp, &sol),
            Err(QuboError::MissingDuals { .. })
        ));
    }

    #[test]
    fn cut_is_tight_at_its_schedule() {
        let inst = synth_instance(2, 2, 3, 5);
        for sched in [CommitmentSchedule::all_on(&inst), CommitmentSchedule::all_off(&inst)] {
            let sp = build_subproblem(&inst, &sched);
            let sol = solve_subproblem(&inst, &sp, None).unwrap();
            let cut = extract_raw_cut(&inst, &sp, &sol.solution).unwrap();
            let lhs = cut.affine.eval_schedule(&sched);
            assert!((lhs - sol.value).abs() <= 1e-6 * sol.value.abs().max(1.0), "{lhs} vs {}", sol.value);
        }
    }

    #[test]
    fn text_round_trip() {
        let mut q = Qubo::with_vars(3);
        q.add_linear(0, 1.5);
        q.add_quadratic(0, 2, -2.0);
        q.add_penalty(PenaltyGroup::P1, 3.0, -1.0, vec![(1, 1.0), (2, 1.0)]);
        let back = Qubo::from_text(&q.to_text()).unwrap();
        for x in 0..8u8 {
            let bits: Vec<u8> = (0..3).map(|k| (x >> k) & 1).collect();
            assert!((q.energy(&bits) - back.energy(&bits)).abs() < 1e-12);
        }
    }

    #[test]
    fn all_zero_bits_decode_to_all_off() {
        let inst = synth_instance(2, 2, 3, 2);
        let eta = EtaEncoding { bits: 4, resolution: 1.0 };
        let mq = build_master_qubo(&inst, &[], Penalties::sized(&inst, eta), eta).unwrap();
        let d = decode_sample(&inst, &mq, &vec![0; mq.qubo.len()]).unwrap();
        assert!(d.schedule.u.iter().flatten().all(|&b| !b));
        assert_eq!(d.eta, 0.0);
    }
}
