//! Run reports and the CSV files written next to them.
//!
//! `iterations.csv` holds only deterministic fields so two runs with the same
//! configuration can be compared byte for byte; wall times live in the JSON
//! report and in `sweep.csv`.

use std::time::Duration;

use serde::Serialize;
use uc_core::formulation::ScheduleCost;
use uc_core::{IterationRecord, LoopConfig, Qc4ucResult, StopReason, UcInstance};

pub const REPORT_SCHEMA: &str = "report-v1";
pub const ITERATIONS_SCHEMA: &str = "iterations-v1";
pub const SWEEP_SCHEMA: &str = "sweep-v1";
pub const SUMMARY_SCHEMA: &str = "sweep-summary-v1";

#[derive(Debug, Clone, Serialize)]
pub struct InstanceSummary {
    pub generators: usize,
    pub buses: usize,
    pub horizon: usize,
    pub lines: usize,
}

/// Objective split into its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostSplit {
    pub objective: f64,
    pub commitment: f64,
    pub dispatch: f64,
    pub generation: f64,
    pub penalty: f64,
}

impl From<&ScheduleCost> for CostSplit {
    fn from(c: &ScheduleCost) -> Self {
        let dispatch = c.recourse - c.penalty;
        Self {
            objective: c.total,
            commitment: c.commitment,
            dispatch,
            generation: c.commitment + dispatch,
            penalty: c.penalty,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CutTotals {
    pub from_iterations: usize,
    pub from_gvns: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoverySummary {
    pub radius: usize,
    pub hamming: usize,
    pub nodes: usize,
    pub milp_objective: f64,
    pub max_residual: f64,
}

/// Wall times in seconds.
#[derive(Debug, Clone, Serialize)]
pub struct Times {
    pub total: f64,
    pub benders: f64,
    pub recovery: f64,
    pub oracle: f64,
    pub qubo_build: f64,
    pub master: f64,
    pub subproblems: f64,
    pub gvns: f64,
    pub per_iteration: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub instance: InstanceSummary,
    pub config: LoopConfig,
    pub stop: StopReason,
    pub iterations: usize,
    pub gvns_runs: usize,
    pub subproblems_solved: usize,
    pub cuts: CutTotals,
    pub pre_recovery: CostSplit,
    #[serde(rename = "final")]
    pub final_cost: CostSplit,
    pub final_objective: f64,
    pub penalty_cost: f64,
    pub generation_cost: f64,
    pub recovery: RecoverySummary,
    /// Commitment per generator as a 0/1 string over time.
    pub schedule: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_percent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pre_recovery_gap_percent: Option<f64>,
    pub records: Vec<IterationRecord>,
    pub times: Times,
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

impl RunReport {
    pub fn new(inst: &UcInstance, cfg: &LoopConfig, res: &Qc4ucResult) -> Self {
        let b = &res.benders;
        let records = &b.records;
        let from_iterations = records.iter().filter(|r| r.cut_added).count();
        let from_gvns = records.iter().map(|r| r.gvns_cuts).sum();
        let stage = |f: fn(&IterationRecord) -> Duration| records.iter().map(|r| secs(f(r))).sum::<f64>();
        let final_cost = CostSplit::from(&res.recovery.cost);
        RunReport {
            schema: REPORT_SCHEMA,
            instance: InstanceSummary {
                generators: inst.num_gens(),
                buses: inst.num_buses(),
                horizon: inst.horizon,
                lines: inst.lines.len(),
            },
            config: cfg.clone(),
            stop: b.stop,
            iterations: records.len(),
            gvns_runs: b.gvns_runs,
            subproblems_solved: b.subproblems,
            cuts: CutTotals {
                from_iterations,
                from_gvns,
                total: b.cuts.len(),
            },
            pre_recovery: CostSplit::from(&b.cost),
            final_cost,
            final_objective: res.objective,
            penalty_cost: final_cost.penalty,
            generation_cost: final_cost.generation,
            recovery: RecoverySummary {
                radius: cfg.recovery_k,
                hamming: res.recovery.hamming,
                nodes: res.recovery.nodes,
                milp_objective: res.recovery.objective,
                max_residual: res.recovery.max_residual,
            },
            schedule: res
                .recovery
                .schedule
                .u
                .iter()
                .map(|row| row.iter().map(|&b| if b { '1' } else { '0' }).collect())
                .collect(),
            oracle_objective: res.oracle.as_ref().map(|o| o.objective),
            gap_percent: res.gap_percent,
            pre_recovery_gap_percent: res.pre_recovery_gap_percent,
            records: records.clone(),
            times: Times {
                total: secs(res.times.total),
                benders: secs(res.times.benders),
                recovery: secs(res.times.recovery),
                oracle: secs(res.times.oracle),
                qubo_build: stage(|r| r.times.build),
                master: stage(|r| r.times.master),
                subproblems: stage(|r| r.times.subproblems),
                gvns: stage(|r| r.times.gvns),
                per_iteration: records
                    .iter()
                    .map(|r| secs(r.times.build + r.times.master + r.times.subproblems + r.times.gvns))
                    .collect(),
            },
        }
    }

    /// Checks that totals agree with the per-iteration records and that the
    /// cost split adds up.
    pub fn check(&self) -> Result<(), String> {
        let c = &self.cuts;
        if c.from_iterations + c.from_gvns != c.total {
            return Err(format!("cut totals {} + {} != {}", c.from_iterations, c.from_gvns, c.total));
        }
        if self.records.last().map(|r| r.cuts_total) != Some(c.total) {
            return Err("last record disagrees with the cut total".into());
        }
        if self.records.len() != self.iterations {
            return Err("iteration count disagrees with the records".into());
        }
        let sum = self.penalty_cost + self.generation_cost;
        if (sum - self.final_objective).abs() > 1e-6 * self.final_objective.abs().max(1.0) {
            return Err(format!("penalty + generation = {sum}, final objective {}", self.final_objective));
        }
        if let (Some(o), Some(g)) = (self.oracle_objective, self.gap_percent) {
            let expect = 100.0 * (self.final_objective - o) / o.abs().max(1e-9);
            if (expect - g).abs() > 1e-9 * expect.abs().max(1.0) {
                return Err(format!("gap {g} does not match {expect}"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Serialize)]
struct IterationRow {
    schema: &'static str,
    seed: u64,
    iteration: usize,
    master_objective: f64,
    best_energy: f64,
    distinct_schedules: usize,
    iteration_best: f64,
    incumbent: f64,
    chosen_q: f64,
    chosen_eta: f64,
    violation: f64,
    chosen_penalty: f64,
    best_penalty: f64,
    cut_added: bool,
    cuts_total: usize,
    cut_eta_star: f64,
    cut_bits_rounded: usize,
    cut_bits_unrounded: usize,
    eta_bits: usize,
    slack_bits: usize,
    qubo_vars: usize,
    gvns_cuts: usize,
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

/// Iteration records of one or more runs, in the order given.
pub fn iterations_csv<'a>(runs: impl IntoIterator<Item = &'a RunReport>) -> Vec<u8> {
    to_csv(runs.into_iter().flat_map(|run| {
        run.records.iter().map(move |r| IterationRow {
            schema: ITERATIONS_SCHEMA,
            seed: run.config.seed,
            iteration: r.iteration,
            master_objective: r.master_objective,
            best_energy: r.best_energy,
            distinct_schedules: r.distinct_schedules,
            iteration_best: r.iteration_best,
            incumbent: r.incumbent,
            chosen_q: r.chosen_q,
            chosen_eta: r.chosen_eta,
            violation: r.violation,
            chosen_penalty: r.chosen_penalty,
            best_penalty: r.best_penalty,
            cut_added: r.cut_added,
            cuts_total: r.cuts_total,
            cut_eta_star: r.cut_eta_star,
            cut_bits_rounded: r.cut_bits_rounded,
            cut_bits_unrounded: r.cut_bits_unrounded,
            eta_bits: r.eta_bits,
            slack_bits: r.slack_bits,
            qubo_vars: r.qubo_vars,
            gvns_cuts: r.gvns_cuts,
        })
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub schema: &'static str,
    pub seed: u64,
    pub final_objective: f64,
    pub oracle_objective: Option<f64>,
    pub gap_percent: Option<f64>,
    pub pre_recovery_objective: f64,
    pub pre_recovery_gap_percent: Option<f64>,
    pub penalty_cost: f64,
    pub generation_cost: f64,
    pub iterations: usize,
    pub stop: String,
    pub gvns_runs: usize,
    pub cuts: usize,
    pub recovery_hamming: usize,
    pub max_residual: f64,
    pub seconds: f64,
}

impl From<&RunReport> for SweepRow {
    fn from(r: &RunReport) -> Self {
        SweepRow {
            schema: SWEEP_SCHEMA,
            seed: r.config.seed,
            final_objective: r.final_objective,
            oracle_objective: r.oracle_objective,
            gap_percent: r.gap_percent,
            pre_recovery_objective: r.pre_recovery.objective,
            pre_recovery_gap_percent: r.pre_recovery_gap_percent,
            penalty_cost: r.penalty_cost,
            generation_cost: r.generation_cost,
            iterations: r.iterations,
            stop: format!("{:?}", r.stop),
            gvns_runs: r.gvns_runs,
            cuts: r.cuts.total,
            recovery_hamming: r.recovery.hamming,
            max_residual: r.recovery.max_residual,
            seconds: r.times.total,
        }
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> Vec<u8> {
    to_csv(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub schema: &'static str,
    pub runs: usize,
    /// Runs with an oracle objective; the gap counts refer to these.
    pub compared: usize,
    pub within_1pct: usize,
    pub within_5pct: usize,
    pub mean_gap_percent: Option<f64>,
    pub max_gap_percent: Option<f64>,
    pub mean_final_objective: f64,
    pub mean_penalty_cost: f64,
    pub mean_iterations: f64,
    pub mean_seconds: f64,
}

impl SweepSummary {
    pub fn new(rows: &[SweepRow]) -> Self {
        let n = rows.len().max(1) as f64;
        let gaps: Vec<f64> = rows.iter().filter_map(|r| r.gap_percent).collect();
        let mean = |f: fn(&SweepRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        SweepSummary {
            schema: SUMMARY_SCHEMA,
            runs: rows.len(),
            compared: gaps.len(),
            within_1pct: gaps.iter().filter(|&&g| g <= 1.0).count(),
            within_5pct: gaps.iter().filter(|&&g| g <= 5.0).count(),
            mean_gap_percent: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
            max_gap_percent: gaps.iter().copied().reduce(f64::max),
            mean_final_objective: mean(|r| r.final_objective),
            mean_penalty_cost: mean(|r| r.penalty_cost),
            mean_iterations: mean(|r| r.iterations as f64),
            mean_seconds: mean(|r| r.seconds),
        }
    }

    pub fn to_csv(&self) -> Vec<u8> {
        to_csv([self])
    }

    pub fn line(&self) -> String {
        format!(
            "{} runs, {} within 1%, {} within 5% of {} compared; mean gap {}",
            self.runs,
            self.within_1pct,
            self.within_5pct,
            self.compared,
            self.mean_gap_percent.map_or("n/a".to_string(), |g| format!("{g:.4}%"))
        )
    }
}
