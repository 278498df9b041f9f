use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;
use uc_core::sampler::ExternalSampler;
use uc_core::{
    load_instance, run_qc4uc, synth_instance, InstanceError, LoopConfig, LoopError, SamplerError, SamplerRegistry,
    UcInstance,
};

use crate::report::{iterations_csv, sweep_csv, RunReport, SweepRow, SweepSummary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("solver failed: {0}")]
    Solver(LoopError),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<LoopError> for CliError {
    fn from(e: LoopError) -> Self {
        match e {
            LoopError::Config(m) => CliError::Invalid(m),
            LoopError::Sampler {
                source: SamplerError::Unknown(name),
                ..
            } => CliError::Invalid(format!("no sampler named {name}")),
            other => CliError::Solver(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) | CliError::Instance(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}

/// `G,N,T` or `G,N,T,S` for a synthetic instance with instance seed `S`
/// (default 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSpec {
    pub gens: usize,
    pub buses: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl FromStr for SynthSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(format!("expected G,N,T[,SEED], got {s:?}"));
        }
        let num = |p: &str| p.parse::<u64>().map_err(|e| format!("{p:?}: {e}"));
        let spec = SynthSpec {
            gens: num(parts[0])? as usize,
            buses: num(parts[1])? as usize,
            horizon: num(parts[2])? as usize,
            seed: parts.get(3).map(|p| num(p)).transpose()?.unwrap_or(0),
        };
        if spec.gens == 0 || spec.buses == 0 || spec.horizon == 0 {
            return Err("G, N and T must be at least 1".into());
        }
        Ok(spec)
    }
}

/// Half-open `a..b` or a single seed.
pub fn parse_seed_range(s: &str) -> Result<Range<u64>, String> {
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b),
        None => (s, ""),
    };
    let a: u64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b: u64 = if b.is_empty() {
        a + 1
    } else {
        b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?
    };
    if b <= a {
        return Err(format!("empty seed range {s:?}"));
    }
    Ok(a..b)
}

#[derive(Debug, Clone)]
pub enum InstanceSource {
    File(PathBuf),
    Synth(SynthSpec),
}

impl InstanceSource {
    pub fn load(&self) -> Result<UcInstance, CliError> {
        match self {
            InstanceSource::File(p) => Ok(load_instance(p)?),
            InstanceSource::Synth(s) => Ok(synth_instance(s.gens, s.buses, s.horizon, s.seed)),
        }
    }
}

/// Default samplers plus `name=command args…` external programs.
pub fn build_registry(noise_rate: f64, externals: &[String]) -> Result<SamplerRegistry, CliError> {
    if !(0.0..=1.0).contains(&noise_rate) {
        return Err(CliError::Invalid("noise rate must lie in [0, 1]".into()));
    }
    let mut reg = SamplerRegistry::with_defaults(noise_rate);
    for spec in externals {
        let (name, cmd) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Invalid(format!("expected NAME=COMMAND, got {spec:?}")))?;
        let mut words = cmd.split_whitespace();
        let program = words
            .next()
            .ok_or_else(|| CliError::Invalid(format!("empty command for sampler {name}")))?;
        let sampler = ExternalSampler::new(name, program, words.map(String::from).collect());
        reg.register(name, Box::new(sampler))
            .map_err(|e| CliError::Invalid(e.to_string()))?;
    }
    Ok(reg)
}

pub fn solve(inst: &UcInstance, cfg: &LoopConfig, reg: &SamplerRegistry, oracle: bool) -> Result<RunReport, CliError> {
    let res = run_qc4uc(inst, cfg, reg, oracle)?;
    let report = RunReport::new(inst, cfg, &res);
    debug_assert_eq!(report.check(), Ok(()));
    Ok(report)
}

/// One run per seed, in parallel; reports come back in seed order.
pub fn sweep(
    inst: &UcInstance,
    base: &LoopConfig,
    seeds: Range<u64>,
    reg: &SamplerRegistry,
    oracle: bool,
) -> Result<Vec<RunReport>, CliError> {
    base.validate()?;
    // The oracle does not depend on the seed; solve it once.
    let oracle_value = if oracle {
        Some(uc_core::exact_optimum(inst)?.objective)
    } else {
        None
    };
    let seeds: Vec<u64> = seeds.collect();
    seeds
        .par_iter()
        .map(|&seed| {
            let cfg = LoopConfig {
                seed,
                ..base.clone()
            };
            let mut report = solve(inst, &cfg, reg, false)?;
            if let Some(o) = oracle_value {
                let gap = |v: f64| uc_core::hybrid::gap_percent(v, o);
                report.oracle_objective = Some(o);
                report.gap_percent = Some(gap(report.final_objective));
                report.pre_recovery_gap_percent = Some(gap(report.pre_recovery.objective));
            }
            Ok(report)
        })
        .collect()
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes `report.json` and `iterations.csv`.
pub fn write_solve(dir: &Path, report: &RunReport) -> Result<(), CliError> {
    ensure_dir(dir)?;
    write(&dir.join("report.json"), report.to_json().as_bytes())?;
    write(&dir.join("iterations.csv"), &iterations_csv([report]))
}

/// Writes `sweep.csv`, `summary.csv` and the combined `iterations.csv`.
pub fn write_sweep(dir: &Path, reports: &[RunReport]) -> Result<SweepSummary, CliError> {
    ensure_dir(dir)?;
    let rows: Vec<SweepRow> = reports.iter().map(SweepRow::from).collect();
    let summary = SweepSummary::new(&rows);
    write(&dir.join("sweep.csv"), &sweep_csv(&rows))?;
    write(&dir.join("summary.csv"), &summary.to_csv())?;
    write(&dir.join("iterations.csv"), &iterations_csv(reports))?;
    Ok(summary)
}
