//! `blab`: deterministic experiment driver for the billiard laboratory.
//!
//! Exit codes: 0 success, 1 usage/config/data error, 2 numerical failure.

mod commands;
mod config;
mod output;

use anyhow::{bail, Context, Result};
use blab_core::{DynamicsError, StepFailure};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use commands::FixtureKind;
use config::ExperimentConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "blab",
    version,
    about = "billiard dynamics and fractal analysis experiments"
)]
struct Cli {
    /// Experiment description (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's rng_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config's output_path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker pool size; falls back to BLAB_THREADS, then to the machine
    /// parallelism. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Iterate the billiard map and write a CSV trace.
    Map,
    /// Find period-3 orbits and write a JSON report with diagnostics.
    Orbits,
    /// Sample the period-3 set; write the cloud CSV plus an analysis JSON.
    P3,
    /// Analyze a point-cloud CSV, or emit a built-in fixture cloud.
    Fractal {
        #[arg(long, value_enum)]
        make_fixture: Option<FixtureKind>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let numerical = err
                .chain()
                .any(|c| c.is::<DynamicsError>() || c.is::<StepFailure>());
            ExitCode::from(if numerical { 2 } else { 1 })
        }
    }
}

fn configured_threads(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("BLAB_THREADS") {
        Ok(v) => {
            let n = v
                .parse::<usize>()
                .with_context(|| format!("BLAB_THREADS must be an integer, got {v:?}"))?;
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = configured_threads(cli.threads)? {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        // ignore the error: the global pool can only be set once
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }

    if let Cmd::Fractal {
        make_fixture: Some(kind),
    } = cli.cmd
    {
        let out = match (&cli.out, &cli.config) {
            (Some(out), _) => out.clone(),
            (None, Some(path)) => ExperimentConfig::load(path)?
                .output_path
                .context("config has no output_path and no --out was given")?,
            (None, None) => bail!("--make-fixture needs --out (or a config with output_path)"),
        };
        return commands::make_fixture(kind, &out);
    }

    let config_path = cli
        .config
        .as_ref()
        .context("--config is required (see --help)")?;
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_path = Some(out);
    }
    let out = cfg
        .output_path
        .clone()
        .context("no output path: set output_path in the config or pass --out")?;

    match cli.cmd {
        Cmd::Map => commands::cmd_map(&cfg, &out),
        Cmd::Orbits => commands::cmd_orbits(&cfg, &out),
        Cmd::P3 => commands::cmd_p3(&cfg, &out),
        Cmd::Fractal { .. } => commands::cmd_fractal(&cfg, &out),
    }
}
