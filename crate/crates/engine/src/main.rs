use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use lsmc_engine::{run_experiment, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(name = "engine", version, about = "Nested Monte Carlo sensitivity and SIMM experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment; exits non-zero if any gate fails.
    Run {
        config: PathBuf,
        /// Worker threads for scenario-level parallelism.
        #[arg(long)]
        threads: Option<usize>,
        /// Restore the full benchmark and demo path counts.
        #[arg(long)]
        paper_scale: bool,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run a single seed instead of the configured list.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Validate a config and list every problem found.
    Check { config: PathBuf },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            threads,
            paper_scale,
            out,
            seed_override,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let options = RunOptions {
                threads,
                paper_scale,
                out,
                seed_override,
            };
            let report = run_experiment(&cfg, &options)?;
            for g in &report.gates {
                println!("{} {}: {}", if g.passed { "PASS" } else { "FAIL" }, g.name, g.detail);
            }
            println!("outputs written to {}", report.output_dir.display());
            Ok(report.passed())
        }
        Command::Check { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.validate()?;
            println!("{} is valid", config.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
