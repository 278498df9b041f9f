use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, ValueEnum};
use uc_cli::run::{build_registry, parse_seed_range, solve, sweep, write_solve, write_sweep, CliError, InstanceSource, SynthSpec};
use uc_core::LoopConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

/// Hybrid Benders unit-commitment solver with a sampled QUBO master.
///
/// With `--seeds` the same instance is solved once per seed in parallel and
/// `sweep.csv`, `summary.csv` and `iterations.csv` are written; otherwise a
/// single run writes `report.json` and `iterations.csv`.
#[derive(Debug, Parser)]
#[command(name = "hybrid-uc", version)]
#[command(group(ArgGroup::new("source").required(true).args(["instance", "synth"])))]
struct Args {
    /// Instance JSON file.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Synthetic instance `G,N,T[,SEED]`.
    #[arg(long)]
    synth: Option<SynthSpec>,
    #[arg(long, default_value_t = 0, conflicts_with = "seeds")]
    seed: u64,
    /// Seed range `a..b` (half-open) for a sweep.
    #[arg(long, value_parser = parse_seed_range)]
    seeds: Option<std::ops::Range<u64>>,
    #[arg(long, default_value = "sa")]
    sampler: String,
    /// Extra sampler `NAME=COMMAND [ARGS]` run as an external process.
    #[arg(long = "external", value_name = "NAME=COMMAND")]
    externals: Vec<String>,
    /// Bit-flip probability of the `noisy` sampler.
    #[arg(long, default_value_t = 0.05)]
    noise_rate: f64,
    /// Decimal places kept in cut coefficients when rounding is off.
    #[arg(long, default_value_t = 2)]
    precision: u32,
    #[arg(long)]
    no_rounding: bool,
    #[arg(long, default_value_t = 3)]
    stall_window: usize,
    /// Stall threshold in $; defaults to 0.1% of the first objective.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    /// Annealing sweeps per read.
    #[arg(long, default_value_t = 50)]
    sweeps: usize,
    #[arg(long, default_value_t = 1)]
    gvns_k1: usize,
    #[arg(long, default_value_t = 3)]
    gvns_k2: usize,
    #[arg(long, default_value_t = 20)]
    gvns_attempts: usize,
    #[arg(long, default_value_t = 3)]
    recovery_k: usize,
    /// Stop once an iteration finds a schedule with imbalance cost at most
    /// this many $.
    #[arg(long, allow_negative_numbers = true)]
    penalty_bound: Option<f64>,
    #[arg(long, default_value_t = 25)]
    max_iters: usize,
    /// Solve the full MILP by branch and bound for the gap.
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    oracle: Toggle,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Args {
    fn config(&self) -> LoopConfig {
        LoopConfig {
            stall_window: self.stall_window,
            epsilon: self.epsilon,
            samples: self.samples,
            sweeps: self.sweeps,
            gvns_k1: self.gvns_k1,
            gvns_k2: self.gvns_k2,
            gvns_attempts: self.gvns_attempts,
            recovery_k: self.recovery_k,
            penalty_bound: self.penalty_bound.unwrap_or(-1.0),
            max_iters: self.max_iters,
            precision: self.precision,
            rounding: !self.no_rounding,
            sampler: self.sampler.clone(),
            seed: self.seed,
        }
    }

    fn source(&self) -> InstanceSource {
        match (&self.instance, self.synth) {
            (Some(p), _) => InstanceSource::File(p.clone()),
            (None, Some(s)) => InstanceSource::Synth(s),
            (None, None) => unreachable!("clap requires one source"),
        }
    }
}

fn run(args: &Args) -> Result<(), CliError> {
    let inst = args.source().load()?;
    let reg = build_registry(args.noise_rate, &args.externals)?;
    let cfg = args.config();
    let oracle = args.oracle == Toggle::On;
    match &args.seeds {
        None => {
            let report = solve(&inst, &cfg, &reg, oracle)?;
            write_solve(&args.out, &report)?;
            print!("objective {:.4}", report.final_objective);
            if let Some(g) = report.gap_percent {
                print!(", gap {g:.4}%");
            }
            println!(", {} iterations ({:?})", report.iterations, report.stop);
        }
        Some(seeds) => {
            let reports = sweep(&inst, &cfg, seeds.clone(), &reg, oracle)?;
            let summary = write_sweep(&args.out, &reports)?;
            println!("{}", summary.line());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
