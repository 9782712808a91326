//! Batch command-line front end.
//!
//! ```text
//! heavybranch <subcommand> --config <path> [--seed N] [--out DIR] [--threads K] [--n N] [--reps R]
//! ```
//!
//! Subcommands are `simulate`, `oracle`, `tails`, `extremes`, `sums`,
//! `compound` and `validate-config`. Exit code 0 on success, 2 on a
//! configuration error (including a non-ergodic model), 3 on a runtime or
//! statistical-guard failure.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiment::{run_experiment, ExperimentConfig, ExperimentKind, RunOutcome};

#[derive(Debug, Parser)]
#[command(name = "heavybranch", version, about = "Heavy-tailed branching processes with immigration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's `output_dir`, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `sizes.n`.
    #[arg(long)]
    n: Option<u64>,
    /// Overrides `sizes.reps`.
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Forward path of the recursion after burn-in.
    Simulate(RunArgs),
    /// Truncated stationary pmf and the pgf product comparison.
    Oracle(RunArgs),
    /// Tail ratios of backward stationary draws against the theory constant.
    Tails(RunArgs),
    /// Extremal index, cluster sizes, tail process and Fréchet fit on one path.
    Extremes(RunArgs),
    /// Normalized partial sums and their gaussian or stable limit.
    Sums(RunArgs),
    /// Compound-sum tail ratios for a single thinning batch.
    Compound(RunArgs),
    /// Parses the config and checks ergodicity without running anything.
    ValidateConfig(RunArgs),
}

impl Command {
    fn split(self) -> (Option<ExperimentKind>, RunArgs) {
        match self {
            Command::Simulate(a) => (Some(ExperimentKind::Simulate), a),
            Command::Oracle(a) => (Some(ExperimentKind::Oracle), a),
            Command::Tails(a) => (Some(ExperimentKind::Tails), a),
            Command::Extremes(a) => (Some(ExperimentKind::Extremes), a),
            Command::Sums(a) => (Some(ExperimentKind::Sums), a),
            Command::Compound(a) => (Some(ExperimentKind::Compound), a),
            Command::ValidateConfig(a) => (None, a),
        }
    }
}

/// Applies flag overrides to a loaded config.
fn load_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.n {
        cfg.sizes.n = Some(n);
    }
    if let Some(reps) = args.reps {
        cfg.sizes.reps = Some(reps);
    }
    Ok(cfg)
}

fn execute(kind: Option<ExperimentKind>, args: RunArgs) -> Result<String> {
    let cfg = load_config(&args)?;
    let Some(kind) = kind else {
        let report = cfg.model.validate()?;
        return Ok(format!("config ok: {report}"));
    };
    if let Some(cfg_kind) = cfg.experiment {
        if cfg_kind != kind {
            return Err(Error::Config(format!("config is for experiment `{cfg_kind}`, not `{kind}`")));
        }
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let outcome: RunOutcome = match args.threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(format!("--threads {k}: {e}")))?;
            pool.install(|| run_experiment(&cfg, kind, &out))?
        }
        None => run_experiment(&cfg, kind, &out)?,
    };
    Ok(outcome.digest)
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (kind, args) = cli.command.split();
    match execute(kind, args) {
        Ok(digest) => {
            println!("{digest}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
