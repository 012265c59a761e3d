use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use scramble_core::scenario::{self, ModelConfig, ScenarioConfig};
use scramble_core::validate::{self, ValidateOptions};

#[derive(Parser)]
#[command(name = "scramble", version, about = "Information scrambling in spin chains")]
struct Cli {
    /// Output directory, overriding `[output] dir`.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for sampled checks.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measures along the unperturbed evolution.
    Evolve { config: PathBuf },
    /// Surfaces over (t0, t) for a local process at epoch t0.
    QdpSweep { config: PathBuf },
    /// Tripartite mutual information only.
    Tmi { config: PathBuf },
    /// Closed forms against exact evolution.
    Validate {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Rewrites the plot script of every CSV in a directory.
    EmitPlots { dir: PathBuf },
}

fn run_config(config: ScenarioConfig, output: Option<&Path>) -> Result<()> {
    let dir = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.output.dir.clone());
    let result = scenario::run_scenario(&config)?;
    let written = scenario::emit_outputs(&result, &dir)?;
    println!("scenario {} -> {}", result.hash, dir.display());
    for path in written {
        println!("  {}", path.display());
    }
    Ok(())
}

fn is_tmi(entry: &str) -> bool {
    let name = entry.split('@').next().unwrap_or("").trim();
    name.strip_prefix("delta_").unwrap_or(name) == "tmi"
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    let output = cli.output.as_deref();
    match cli.command {
        Command::Evolve { config } => {
            let config = scenario::load_config(&config)?;
            if config.qdp.is_some() {
                bail!("config has a [qdp] section; use `qdp-sweep`");
            }
            run_config(config, output)?;
        }
        Command::QdpSweep { config } => {
            let config = scenario::load_config(&config)?;
            if config.qdp.is_none() {
                bail!("config has no [qdp] section; use `evolve`");
            }
            run_config(config, output)?;
        }
        Command::Tmi { config } => {
            let mut config = scenario::load_config(&config)?;
            if !matches!(config.model, ModelConfig::PqMixture { .. }) {
                config.grid.measures.retain(|m| is_tmi(m));
                if config.grid.measures.is_empty() {
                    bail!("config requests no tmi measure");
                }
                config.validate()?;
            }
            run_config(config, output)?;
        }
        Command::Validate { n, tol } => {
            let report = validate::run(&ValidateOptions {
                n_sites: n,
                tolerance: tol,
                seed: cli.seed,
            })?;
            for check in &report {
                println!("{check}");
            }
            return Ok(report.iter().all(|c| c.pass));
        }
        Command::EmitPlots { dir } => {
            for path in scenario::emit_plot_scripts(&dir)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
