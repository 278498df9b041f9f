//! The hybrid Benders loop: sampled QUBO master, subproblem cuts from the
//! most violated sample, GVNS when progress stalls, and a Hamming-ball MILP
//! recovery at the end.
//!
//! All randomness comes from `LoopConfig::seed` through [`split_seed`], and
//! subproblems are warm started from one fixed reference basis, so a run is
//! reproducible regardless of how rayon schedules the parallel parts.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;
use uc_milp::{solve_milp, FactoredBasis, LpError, MilpOptions, MilpStatus, Relation};

use crate::formulation::{
    build_full_uc, commit_index, schedule_cost, solve_subproblem, solve_subproblem_factored, CommitKind, CommitmentSchedule, DispatchSolution,
    FormulationError, ScheduleCost, Subproblem, SubproblemSolution,
};
use crate::instance::UcInstance;
use crate::qubo::{
    build_master_qubo, decode_sample, extract_raw_cut, BendersCut, CutEncoding, EtaEncoding, Penalties, QuboError,
};
use crate::sampler::{split_seed, AnnealParams, SamplerError, SamplerRegistry};

const MASTER_STREAM: u64 = 1;
const GVNS_STREAM: u64 = 2;

#[derive(Debug, Error)]
pub enum LoopError {
    #[error("invalid loop configuration: {0}")]
    Config(String),
    #[error("iteration {iteration}: {source}")]
    Sampler {
        iteration: usize,
        #[source]
        source: SamplerError,
    },
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("no feasible commitment within Hamming distance {k} of the incumbent; try a larger recovery radius")]
    RecoveryInfeasible { k: usize },
    #[error("recovery MILP stopped with status {0:?}")]
    Recovery(MilpStatus),
    #[error("exact oracle stopped with status {0:?}")]
    Oracle(MilpStatus),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopConfig {
    /// Non-improving iterations before GVNS runs (`i`).
    pub stall_window: usize,
    /// Improvement threshold in $; `None` means 10⁻³ of the first
    /// iteration's best objective.
    pub epsilon: Option<f64>,
    /// Reads per master solve (`n`).
    pub samples: usize,
    pub sweeps: usize,
    pub gvns_k1: usize,
    pub gvns_k2: usize,
    /// Flip sets tried per sample in the GVNS improvement stage.
    pub gvns_attempts: usize,
    /// Hamming radius of the recovery MILP.
    pub recovery_k: usize,
    /// Stop once some subproblem solved in an iteration has imbalance cost
    /// at most this. A negative bound disables the rule.
    pub penalty_bound: f64,
    pub max_iters: usize,
    pub precision: u32,
    pub rounding: bool,
    pub sampler: String,
    pub seed: u64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            stall_window: 3,
            epsilon: None,
            samples: 20,
            sweeps: 50,
            gvns_k1: 1,
            gvns_k2: 3,
            gvns_attempts: 20,
            recovery_k: 3,
            penalty_bound: -1.0,
            max_iters: 25,
            precision: 2,
            rounding: true,
            sampler: "sa".to_string(),
            seed: 0,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), LoopError> {
        let bad = |m: &str| Err(LoopError::Config(m.to_string()));
        if self.stall_window < 1 {
            return bad("stall window must be at least 1");
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return bad("epsilon must be positive");
            }
        }
        if self.samples < 1 {
            return bad("samples must be at least 1");
        }
        if self.sweeps < 1 {
            return bad("sweeps must be at least 1");
        }
        if self.gvns_k1 < 1 || self.gvns_k2 < 1 {
            return bad("GVNS flip counts must be at least 1");
        }
        if self.max_iters < 1 {
            return bad("max iterations must be at least 1");
        }
        if self.penalty_bound.is_nan() {
            return bad("penalty bound is NaN");
        }
        Ok(())
    }

    pub fn encoding(&self) -> CutEncoding {
        CutEncoding {
            rounded: self.rounding,
            precision: self.precision,
        }
    }
}

/// One Benders iteration. Times are kept apart from the deterministic
/// fields so logs can be compared byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `c·x + η` of the lowest-energy sample.
    pub master_objective: f64,
    pub best_energy: f64,
    pub distinct_schedules: usize,
    /// True cost of the best schedule seen this iteration.
    pub iteration_best: f64,
    pub incumbent: f64,
    /// `Q` of the most violated sample.
    pub chosen_q: f64,
    pub chosen_eta: f64,
    pub violation: f64,
    /// Imbalance cost `c_pen·Σ|δ|` of the most violated sample.
    pub chosen_penalty: f64,
    /// Imbalance cost of the lowest-energy sample.
    /// Smallest imbalance cost among this iteration's subproblems.
    pub best_penalty: f64,
    pub cut_added: bool,
    pub cuts_total: usize,
    pub cut_eta_star: f64,
    /// `⌈log₂(η*+1)⌉` of this iteration's cut.
    pub cut_bits_rounded: usize,
    /// `⌈log₂(η*·10^p+1)⌉` of this iteration's cut.
    pub cut_bits_unrounded: usize,
    /// Register widths of the master that was sampled.
    pub eta_bits: usize,
    pub slack_bits: usize,
    pub qubo_vars: usize,
    pub gvns_cuts: usize,
    #[serde(skip)]
    pub times: StageTimes,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimes {
    pub build: Duration,
    pub master: Duration,
    pub subproblems: Duration,
    pub gvns: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    PenaltyBound,
    Converged,
    MaxIterations,
}

/// `true` iff the last `i` consecutive changes of `history` are all within
/// `eps`.
pub fn detect_stall(history: &[f64], i: usize, eps: f64) -> bool {
    assert!(!history.is_empty(), "history must be non-empty");
    if i == 0 || history.len() < i + 1 {
        return false;
    }
    history[history.len() - i - 1..]
        .windows(2)
        .all(|w| (w[1] - w[0]).abs() <= eps)
}

/// Subproblem solutions keyed by schedule.
///
/// Every solve warm starts from the basis of the all-on schedule, so a
/// schedule's result does not depend on which schedules were solved before.
pub struct SubproblemCache<'a> {
    inst: &'a UcInstance,
    template: Subproblem,
    reference: Option<FactoredBasis>,
    entries: Mutex<HashMap<CommitmentSchedule, Arc<Evaluated>>>,
}

pub struct Evaluated {
    pub cost: ScheduleCost,
    pub solution: SubproblemSolution,
}

impl<'a> SubproblemCache<'a> {
    pub fn new(inst: &'a UcInstance) -> Result<Self, LoopError> {
        let template = Subproblem::template(inst);
        let all_on = template.instantiate(&CommitmentSchedule::all_on(inst));
        let reference = match solve_subproblem(inst, &all_on, None)?.solution.basis {
            Some(b) => FactoredBasis::new(&all_on.lp, &b)?,
            None => None,
        };
        Ok(Self {
            inst,
            template,
            reference,
            entries: Mutex::new(HashMap::new()),
        })
    }

    pub fn evaluate(&self, sched: &CommitmentSchedule) -> Result<Arc<Evaluated>, LoopError> {
        if let Some(e) = self.entries.lock().expect("cache lock").get(sched) {
            return Ok(e.clone());
        }
        let sp = self.template.instantiate(sched);
        let solution = match &self.reference {
            Some(f) => solve_subproblem_factored(self.inst, &sp, f)?,
            None => solve_subproblem(self.inst, &sp, None)?,
        };
        let cost = schedule_cost(self.inst, sched, &solution);
        let e = Arc::new(Evaluated { cost, solution });
        self.entries
            .lock()
            .expect("cache lock")
            .insert(sched.clone(), e.clone());
        Ok(e)
    }

    /// Evaluates many schedules in parallel, results in input order.
    pub fn evaluate_all(&self, scheds: &[CommitmentSchedule]) -> Result<Vec<Arc<Evaluated>>, LoopError> {
        scheds.par_iter().map(|s| self.evaluate(s)).collect()
    }

    pub fn cut(&self, sched: &CommitmentSchedule, encoding: CutEncoding) -> Result<BendersCut, LoopError> {
        let e = self.evaluate(sched)?;
        let sp = self.template.instantiate(sched);
        let raw = extract_raw_cut(self.inst, &sp, &e.solution.solution)?;
        Ok(BendersCut::new(self.inst, raw, encoding)?)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Best schedule seen so far; feasible schedules beat infeasible ones.
#[derive(Debug, Clone)]
struct Incumbent {
    schedule: CommitmentSchedule,
    cost: ScheduleCost,
}

impl Incumbent {
    fn better(&self, cost: &ScheduleCost) -> bool {
        let (a, b) = (cost.check.feasible(), self.cost.check.feasible());
        (a && !b) || (a == b && cost.total < self.cost.total)
    }
}

fn offer(inc: &mut Option<Incumbent>, sched: &CommitmentSchedule, cost: &ScheduleCost) {
    match inc {
        Some(i) if !i.better(cost) => {}
        _ => {
            *inc = Some(Incumbent {
                schedule: sched.clone(),
                cost: *cost,
            })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BendersOutcome {
    /// Best schedule found, preferring ones that meet min up/down times.
    pub schedule: CommitmentSchedule,
    pub cost: ScheduleCost,
    pub records: Vec<IterationRecord>,
    pub cuts: Vec<BendersCut>,
    pub stop: StopReason,
    pub epsilon: f64,
    pub gvns_runs: usize,
    pub subproblems: usize,
}

/// Result of the GVNS stage for one sample.
#[derive(Debug, Clone)]
pub struct GvnsTrack {
    /// Schedule after the improvement stage, when it found a better one.
    pub improved: Option<CommitmentSchedule>,
    /// Output: the (improved or original) schedule shaken by `k₂` flips.
    pub shaken: CommitmentSchedule,
}

fn flip_random_u(sched: &mut CommitmentSchedule, inst: &UcInstance, k: usize, rng: &mut ChaCha8Rng) {
    let gt = inst.num_gens() * inst.horizon;
    for idx in sample_indices(rng, gt, k.min(gt)).into_iter() {
        let (g, t) = (idx / inst.horizon, idx % inst.horizon);
        sched.u[g][t] = !sched.u[g][t];
    }
    *sched = sched.repaired(inst);
}

/// Improvement then shaking for each sample; tracks run in parallel with
/// per-track seeds.
pub fn run_gvns(
    samples: &[CommitmentSchedule],
    inst: &UcInstance,
    cfg: &LoopConfig,
    cache: &SubproblemCache,
    seed: u64,
) -> Result<Vec<GvnsTrack>, LoopError> {
    samples
        .par_iter()
        .enumerate()
        .map(|(k, start)| {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, k as u64));
            let current = start.repaired(inst);
            let base = cache.evaluate(&current)?.cost;
            let mut best = (current.clone(), base);
            let mut improved = None;
            for _ in 0..cfg.gvns_attempts {
                let mut trial = best.0.clone();
                flip_random_u(&mut trial, inst, cfg.gvns_k1, &mut rng);
                let cost = cache.evaluate(&trial)?.cost;
                let not_worse_feasibility = cost.check.feasible() || !best.1.check.feasible();
                if not_worse_feasibility && cost.total < best.1.total {
                    improved = Some(trial.clone());
                    best = (trial, cost);
                }
            }
            let mut shaken = improved.clone().unwrap_or(current);
            flip_random_u(&mut shaken, inst, cfg.gvns_k2, &mut rng);
            Ok(GvnsTrack { improved, shaken })
        })
        .collect()
}

/// Adds `cut` unless an identical encoded cut is already present.
fn push_cut(cuts: &mut Vec<BendersCut>, seen: &mut HashSet<(Vec<i64>, i64)>, cut: BendersCut) -> bool {
    if seen.insert((cut.units.clone(), cut.constant_units)) {
        cuts.push(cut);
        true
    } else {
        false
    }
}

pub fn run_benders(
    inst: &UcInstance,
    cfg: &LoopConfig,
    registry: &SamplerRegistry,
) -> Result<BendersOutcome, LoopError> {
    cfg.validate()?;
    if !registry.contains(&cfg.sampler) {
        return Err(LoopError::Sampler {
            iteration: 0,
            source: SamplerError::Unknown(cfg.sampler.clone()),
        });
    }
    let encoding = cfg.encoding();
    let cache = SubproblemCache::new(inst)?;
    let mut cuts: Vec<BendersCut> = Vec::new();
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut incumbent: Option<Incumbent> = None;
    let mut history: Vec<f64> = Vec::new();
    let mut epsilon = cfg.epsilon;
    let mut stop = StopReason::MaxIterations;
    let mut gvns_runs = 0;
    let conv_tol = (crate::formulation::num_commit_vars(inst) + 1) as f64 * encoding.resolution();

    for iteration in 1..=cfg.max_iters {
        let mut times = StageTimes::default();
        let t0 = Instant::now();
        let eta = EtaEncoding::for_cuts(&cuts, encoding);
        let mq = build_master_qubo(inst, &cuts, Penalties::sized(inst, eta), eta)?;
        times.build = t0.elapsed();

        let t0 = Instant::now();
        let params = AnnealParams::new(
            cfg.samples,
            cfg.sweeps,
            split_seed(split_seed(cfg.seed, MASTER_STREAM), iteration as u64),
        );
        let set = registry
            .sample(&cfg.sampler, &mq.qubo, &params)
            .map_err(|source| LoopError::Sampler { iteration, source })?;
        times.master = t0.elapsed();

        let t0 = Instant::now();
        let decoded = set
            .samples
            .iter()
            .map(|s| decode_sample(inst, &mq, &s.bits))
            .collect::<Result<Vec<_>, _>>()?;
        let schedules: Vec<CommitmentSchedule> = decoded.iter().map(|d| d.schedule.repaired(inst)).collect();
        let mut distinct: Vec<CommitmentSchedule> = Vec::new();
        for s in &schedules {
            if !distinct.contains(s) {
                distinct.push(s.clone());
            }
        }
        let evaluated = cache.evaluate_all(&distinct)?;
        let mut iteration_best = f64::INFINITY;
        let mut best_penalty = f64::INFINITY;
        for (s, e) in distinct.iter().zip(&evaluated) {
            offer(&mut incumbent, s, &e.cost);
            iteration_best = iteration_best.min(e.cost.total);
            best_penalty = best_penalty.min(e.cost.penalty);
        }

        // Most violated sample: largest Q(u) − η; ties keep the lower energy.
        let mut chosen = 0;
        let mut violations = Vec::with_capacity(decoded.len());
        for (k, (d, s)) in decoded.iter().zip(&schedules).enumerate() {
            let v = cache.evaluate(s)?.cost.recourse - d.eta;
            violations.push(v);
            if v > violations[chosen] {
                chosen = k;
            }
        }
        debug_assert!(violations.iter().all(|&v| v <= violations[chosen]));
        let chosen_sched = &schedules[chosen];
        let chosen_eval = cache.evaluate(chosen_sched)?;
        let cut = cache.cut(chosen_sched, encoding)?;
        let (cut_eta_star, bits_m, bits_n) = (cut.eta_star, cut.bits_rounded, cut.bits_unrounded);
        let cut_added = push_cut(&mut cuts, &mut seen, cut);
        times.subproblems = t0.elapsed();

        if epsilon.is_none() {
            epsilon = Some(1e-3 * iteration_best.abs().max(1.0));
        }
        let eps = epsilon.expect("set above");
        history.push(incumbent.as_ref().expect("schedules evaluated").cost.total);

        let t0 = Instant::now();
        let mut gvns_cuts = 0;
        if detect_stall(&history, cfg.stall_window, eps) {
            gvns_runs += 1;
            let seed = split_seed(split_seed(cfg.seed, GVNS_STREAM), iteration as u64);
            let tracks = run_gvns(&schedules, inst, cfg, &cache, seed)?;
            for track in &tracks {
                if let Some(better) = &track.improved {
                    let cost = cache.evaluate(better)?.cost;
                    best_penalty = best_penalty.min(cost.penalty);
                    offer(&mut incumbent, better, &cost);
                    if push_cut(&mut cuts, &mut seen, cache.cut(better, encoding)?) {
                        gvns_cuts += 1;
                    }
                }
                offer(&mut incumbent, &track.shaken, &cache.evaluate(&track.shaken)?.cost);
            }
            history.clear();
        }
        times.gvns = t0.elapsed();

        let inc = incumbent.as_ref().expect("at least one schedule evaluated");
        records.push(IterationRecord {
            iteration,
            master_objective: decoded[0].objective,
            best_energy: set.samples[0].energy,
            distinct_schedules: distinct.len(),
            iteration_best,
            incumbent: inc.cost.total,
            chosen_q: chosen_eval.cost.recourse,
            chosen_eta: decoded[chosen].eta,
            violation: violations[chosen],
            chosen_penalty: chosen_eval.cost.penalty,
            best_penalty,
            cut_added,
            cuts_total: cuts.len(),
            cut_eta_star,
            cut_bits_rounded: bits_m,
            cut_bits_unrounded: bits_n,
            eta_bits: mq.layout.eta.bits,
            slack_bits: mq.layout.total_slack_bits(),
            qubo_vars: mq.qubo.len(),
            gvns_cuts,
            times,
        });
        log::debug!(
            "iteration {iteration}: incumbent {:.2}, violation {:.2}, cuts {}",
            inc.cost.total,
            violations[chosen],
            cuts.len()
        );

        if best_penalty <= cfg.penalty_bound {
            stop = StopReason::PenaltyBound;
            break;
        }
        // A repeated cut means the master cannot change; with the violation
        // inside the rounding tolerance that is Benders convergence.
        let stuck = !cut_added && gvns_cuts == 0;
        if stuck && violations[chosen] <= conv_tol + 1e-9 * chosen_eval.cost.recourse.abs() {
            stop = StopReason::Converged;
            break;
        }
    }

    let inc = incumbent.expect("at least one iteration ran");
    Ok(BendersOutcome {
        schedule: inc.schedule,
        cost: inc.cost,
        records,
        cuts,
        stop,
        epsilon: epsilon.unwrap_or(0.0),
        gvns_runs,
        subproblems: cache.len(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Recovery {
    pub schedule: CommitmentSchedule,
    pub dispatch: DispatchSolution,
    pub objective: f64,
    pub cost: ScheduleCost,
    /// Largest row or bound violation of the MILP point.
    pub max_residual: f64,
    pub hamming: usize,
    pub nodes: usize,
}

/// Re-optimizes the full MILP restricted to commitments within Hamming
/// distance `k` (over `u`) of `u_star`.
pub fn k_local_recovery(inst: &UcInstance, u_star: &CommitmentSchedule, k: usize) -> Result<Recovery, LoopError> {
    let mut full = build_full_uc(inst);
    let mut coefs = Vec::new();
    let mut ones = 0usize;
    for g in 0..inst.num_gens() {
        for t in 0..inst.horizon {
            let j = commit_index(inst, CommitKind::U, g, t);
            if u_star.u[g][t] {
                coefs.push((j, -1.0));
                ones += 1;
            } else {
                coefs.push((j, 1.0));
            }
        }
    }
    full.add_row(coefs, Relation::Le, k as f64 - ones as f64);

    let star = u_star.repaired(inst);
    let mut options = MilpOptions::default();
    if star.check(inst).feasible() {
        let sp = Subproblem::template(inst).instantiate(&star);
        let sol = solve_subproblem(inst, &sp, None)?;
        options.warm_start = Some(full.point(&star, &sol.solution.x));
    }
    let sol = solve_milp(&full.model, &options)?;
    match sol.status {
        MilpStatus::Optimal => {}
        MilpStatus::Infeasible => return Err(LoopError::RecoveryInfeasible { k }),
        other => return Err(LoopError::Recovery(other)),
    }
    let schedule = full.schedule(inst, &sol.x);
    let dispatch = full.dispatch(&sol.x);
    let sp = Subproblem::template(inst).instantiate(&schedule);
    let cost = schedule_cost(inst, &schedule, &solve_subproblem(inst, &sp, None)?);
    Ok(Recovery {
        hamming: schedule.hamming_u(u_star),
        max_residual: full.model.max_violation(&sol.x),
        objective: sol.objective,
        schedule,
        dispatch,
        cost,
        nodes: sol.nodes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Oracle {
    pub objective: f64,
    pub schedule: CommitmentSchedule,
}

/// Exact optimum of the full MILP by branch and bound.
pub fn exact_optimum(inst: &UcInstance) -> Result<Oracle, LoopError> {
    let full = build_full_uc(inst);
    let sol = solve_milp(&full.model, &MilpOptions::default())?;
    if sol.status != MilpStatus::Optimal {
        return Err(LoopError::Oracle(sol.status));
    }
    Ok(Oracle {
        objective: sol.objective,
        schedule: full.schedule(inst, &sol.x),
    })
}

/// Relative gap in percent.
pub fn gap_percent(value: f64, reference: f64) -> f64 {
    100.0 * (value - reference) / reference.abs().max(1e-9)
}

#[derive(Debug, Clone, Serialize)]
pub struct Qc4ucResult {
    pub benders: BendersOutcome,
    pub recovery: Recovery,
    /// Final objective (after recovery).
    pub objective: f64,
    pub oracle: Option<Oracle>,
    pub gap_percent: Option<f64>,
    pub pre_recovery_gap_percent: Option<f64>,
    #[serde(skip)]
    pub times: RunTimes,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RunTimes {
    pub benders: Duration,
    pub recovery: Duration,
    pub oracle: Duration,
    pub total: Duration,
}

/// Benders loop, then recovery around its best schedule; with `oracle`
/// the exact optimum is computed for the gap.
pub fn run_qc4uc(
    inst: &UcInstance,
    cfg: &LoopConfig,
    registry: &SamplerRegistry,
    oracle: bool,
) -> Result<Qc4ucResult, LoopError> {
    let start = Instant::now();
    let benders = run_benders(inst, cfg, registry)?;
    let benders_time = start.elapsed();
    let t0 = Instant::now();
    let recovery = k_local_recovery(inst, &benders.schedule, cfg.recovery_k)?;
    let recovery_time = t0.elapsed();
    let t0 = Instant::now();
    let oracle = if oracle { Some(exact_optimum(inst)?) } else { None };
    let oracle_time = t0.elapsed();
    let objective = recovery.cost.total;
    Ok(Qc4ucResult {
        gap_percent: oracle.as_ref().map(|o| gap_percent(objective, o.objective)),
        pre_recovery_gap_percent: oracle.as_ref().map(|o| gap_percent(benders.cost.total, o.objective)),
        objective,
        benders,
        recovery,
        oracle,
        times: RunTimes {
            benders: benders_time,
            recovery: recovery_time,
            oracle: oracle_time,
            total: start.elapsed(),
        },
    })
}
