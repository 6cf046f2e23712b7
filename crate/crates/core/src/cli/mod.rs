//! Command-line front end: `run`, `check` and `sweep`.

pub mod artifacts;
pub mod config;
mod run;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{InstanceConfig, Mode, RawConfig};
pub use run::{check, execute, sweep, RunOutcome, SweepEntry, EXIT_REJECTED};

use crate::error::Error;

#[derive(Debug, Parser)]
#[command(name = "perisolve", version, about = "Time-periodic solutions of degenerate evolution inclusions")]
pub struct Cli {
    /// Directory for artifacts; defaults to the config's output.dir.
    #[arg(long, global = true, env = "PERISOLVE_OUTPUT_DIR")]
    pub output_dir: Option<PathBuf>,
    /// Seed for the probe-based checks; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check hypotheses, solve, and write trajectories and reports.
    Run { config: PathBuf },
    /// Run the hypothesis battery only.
    Check { config: PathBuf },
    /// One run per parameter value.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 0.., allow_hyphen_values = true)]
        values: Vec<String>,
    },
}

fn output_dir(flag: Option<&Path>, cfg: &InstanceConfig) -> PathBuf {
    match (flag, &cfg.output_dir) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => p.clone(),
        (None, None) => PathBuf::from("perisolve-output").join(&cfg.name),
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<InstanceConfig, Error> {
    let mut cfg = InstanceConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Execute a parsed command line; returns the process exit code.
pub fn dispatch(cli: Cli) -> i32 {
    let quiet = cli.quiet;
    let fail = |e: Error| {
        eprintln!("error: {e}");
        e.exit_code()
    };
    match cli.command {
        Command::Run { config } => {
            let cfg = match load(&config, cli.seed) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let out = output_dir(cli.output_dir.as_deref(), &cfg);
            let outcome = execute(&cfg, &out, quiet);
            if outcome.exit_code == 0 {
                if !quiet {
                    println!("ok: artifacts in {}", out.display());
                }
            } else {
                eprintln!("error: {}", outcome.message);
            }
            outcome.exit_code
        }
        Command::Check { config } => {
            let cfg = match load(&config, cli.seed) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match check(&cfg) {
                Ok((code, table)) => {
                    print!("{table}");
                    code
                }
                Err(e) => fail(e),
            }
        }
        Command::Sweep {
            config,
            param,
            values,
        } => {
            let values: Vec<String> = values
                .into_iter()
                .map(|v| v.trim().to_string())
                .filter(|v| !v.is_empty())
                .collect();
            let raw = match RawConfig::load(&config) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            let base = match InstanceConfig::from_raw(&raw) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let out = output_dir(cli.output_dir.as_deref(), &base);
            match sweep(&raw, &param, &values, &out, cli.seed, quiet) {
                Ok(entries) => entries
                    .iter()
                    .map(|e| e.outcome.exit_code)
                    .find(|&c| c != 0)
                    .unwrap_or(0),
                Err(e) => fail(e),
            }
        }
    }
}

pub fn main_entry() -> i32 {
    dispatch(Cli::parse())
}
