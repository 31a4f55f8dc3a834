//! `rwdre`: list available experiments or run one from a TOML config file.
//! Results append to a CSV (plus a JSON-lines manifest); progress goes to
//! stderr. Exit codes: 0 success, 2 configuration or I/O error, 3
//! statistical validity failure, 4 violated invariant.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rwdre_cli::config::ExperimentConfig;
use rwdre_cli::{exit_code, runner, EXPERIMENTS};

#[derive(Parser)]
#[command(
    name = "rwdre",
    version,
    about = "Random walks on dynamical random environments: simulation and estimation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the experiment registry with config schemas.
    List,
    /// Run one experiment config, appending rows to its CSV and manifest.
    Run {
        /// TOML experiment config.
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the replica count.
        #[arg(long)]
        replicas: Option<u64>,
        /// Override the output CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::List => {
            for e in &EXPERIMENTS {
                println!("{}", e.name);
                println!("    {}", e.summary);
                println!("    config: {}", e.schema);
            }
            ExitCode::SUCCESS
        }
        Cmd::Run { config, seed, replicas, out } => {
            match run(&config, seed, replicas, out) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_code(&e) as u8)
                }
            }
        }
    }
}

fn run(
    config: &PathBuf,
    seed: Option<u64>,
    replicas: Option<u64>,
    out: Option<PathBuf>,
) -> rwdre_core::Result<()> {
    init_workers()?;
    let mut cfg = ExperimentConfig::load(config)?;
    cfg.apply_overrides(seed, replicas, out);
    eprintln!(
        "{}: model {}, {} replicas, seed {}",
        cfg.experiment, cfg.model, cfg.replicas, cfg.seed
    );
    let s = runner::run(&cfg)?;
    eprintln!(
        "{}: {} rows -> {} ({} ms, hash {})",
        cfg.experiment,
        s.rows,
        s.csv.display(),
        s.wall_ms,
        s.param_hash
    );
    Ok(())
}

/// Worker threads come from RWDRE_WORKERS; unset means one per core.
/// Results are identical for every worker count; only wall time changes.
fn init_workers() -> rwdre_core::Result<()> {
    let Ok(v) = std::env::var("RWDRE_WORKERS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            rwdre_core::Error::param(format!(
                "RWDRE_WORKERS must be a positive integer, got '{v}'"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| rwdre_core::Error::param(format!("worker pool: {e}")))
}
