//! Command-line front end: `dea train`, `dea sweep`, `dea report`.
//!
//! Exit codes: 0 success, 1 runtime/I-O failure, 2 configuration or usage
//! error, 3 run aborted on a non-finite loss.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dea_core::config::{parse_seed_list, ConfigFile, Overrides};
use dea_core::error::{ConfigError, TrainError};
use dea_core::report::write_report;
use dea_core::trainer::{sweep, train, RunConfig};

#[derive(Parser)]
#[command(name = "dea", version, about = "Ensemble actor-critic training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonRunArgs {
    /// TOML config file; flags override file values.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Environment: pendulum | pointreach.
    #[arg(long)]
    env: Option<String>,
    /// Method: sac | redq | dea.
    #[arg(long)]
    method: Option<String>,
    /// Regime preset: interactive | sample-efficient | desk-interactive |
    /// desk-sample-efficient.
    #[arg(long)]
    regime: Option<String>,
    /// Output directory (default: $DEA_OUT_DIR or ./runs, plus an
    /// auto-generated run name).
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one training run and write metrics.csv, kappa.csv (DEA only),
    /// and run.json.
    Train {
        #[command(flatten)]
        common: CommonRunArgs,
        /// Run seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one training run per seed and write per-seed subdirectories
    /// plus summary.csv.
    Sweep {
        #[command(flatten)]
        common: CommonRunArgs,
        /// Seed list: "1..5" (inclusive) or "1,2,3".
        #[arg(long, value_name = "SPEC")]
        seeds: Option<String>,
        /// Maximum concurrent runs.
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// Aggregate sweep/run directories into report.csv and SVG charts.
    Report {
        /// Input run or sweep directories.
        #[arg(long = "in", value_name = "DIR", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        /// Output directory for report.csv and charts.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NON_FINITE: u8 = 3;

fn out_root() -> PathBuf {
    std::env::var_os("DEA_OUT_DIR").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

fn resolve_config(common: &CommonRunArgs, seed: Option<u64>) -> Result<RunConfig, ConfigError> {
    let file = match &common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let overrides = Overrides {
        seed,
        method: common.method.clone(),
        env: common.env.clone(),
        regime: common.regime.clone(),
        out_dir: common.out_dir.clone(),
    };
    file.resolve(&overrides)
}

fn run_name(cfg: &RunConfig, suffix: &str) -> String {
    format!("{}_{}_{}{suffix}", cfg.env.name(), cfg.method.name(), cfg.regime)
}

fn cmd_train(common: CommonRunArgs, seed: Option<u64>) -> Result<(), u8> {
    let mut cfg = resolve_config(&common, seed).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })?;
    if cfg.out_dir.is_none() {
        let name = format!("{}_seed{}", run_name(&cfg, ""), cfg.seed);
        cfg.out_dir = Some(out_root().join(name));
    }
    let out_dir = cfg.out_dir.clone().unwrap();
    match train(&cfg) {
        Ok(run) => {
            println!(
                "run complete: {} steps, final return {:.3}, artifacts in {}",
                run.stats.env_steps,
                run.final_return(),
                out_dir.display()
            );
            Ok(())
        }
        Err(e @ TrainError::NonFinite { .. }) => {
            eprintln!("error: {e}");
            Err(EXIT_NON_FINITE)
        }
        Err(TrainError::Config(e)) => {
            eprintln!("error: {e}");
            Err(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(EXIT_RUNTIME)
        }
    }
}

fn cmd_sweep(common: CommonRunArgs, seeds: Option<String>, jobs: usize) -> Result<(), u8> {
    let cfg_file = match &common.config {
        Some(path) => ConfigFile::load(path).map_err(|e| {
            eprintln!("error: {e}");
            EXIT_CONFIG
        })?,
        None => ConfigFile::default(),
    };
    let seed_list: Vec<u64> = match (&seeds, &cfg_file.seeds) {
        (Some(spec), _) => parse_seed_list(spec),
        (None, Some(spec)) => spec.expand(),
        (None, None) => Ok((1..=5).collect()),
    }
    .map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })?;
    let mut deduped: Vec<u64> = Vec::new();
    for &s in &seed_list {
        if deduped.contains(&s) {
            eprintln!("warning: duplicate seed {s} ignored");
        } else {
            deduped.push(s);
        }
    }

    let mut template = resolve_config(&common, None).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })?;
    if template.out_dir.is_none() {
        template.out_dir = Some(out_root().join(run_name(&template, "_sweep")));
    }
    let base = template.out_dir.clone().unwrap();

    let outcomes = sweep(&template, &deduped, jobs, Some(&base), false).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_RUNTIME
    })?;
    let mut failures = 0;
    for o in &outcomes {
        match &o.error {
            None => println!(
                "seed {}: ok, final return {:.3}, aulc {:.3}",
                o.seed, o.row.final_return, o.row.aulc
            ),
            Some(err) => {
                failures += 1;
                eprintln!("seed {}: failed: {err}", o.seed);
            }
        }
    }
    println!("summary written to {}", base.join("summary.csv").display());
    if failures == outcomes.len() {
        // Nothing succeeded; surface the failure class.
        return Err(EXIT_RUNTIME);
    }
    Ok(())
}

fn cmd_report(inputs: Vec<PathBuf>, out: PathBuf) -> Result<(), u8> {
    match write_report(&inputs, &out) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(EXIT_RUNTIME)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { common, seed } => cmd_train(common, seed),
        Command::Sweep { common, seeds, jobs } => cmd_sweep(common, seeds, jobs),
        Command::Report { inputs, out } => cmd_report(inputs, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}
