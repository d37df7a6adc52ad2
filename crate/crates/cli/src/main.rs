use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use stiffparam_cli::commands::{self, Outcome};
use stiffparam_cli::config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "stiffparam",
    version,
    about = "Regularized parametric implicit integrators: experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (flat key = value file).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSVs and checkpoints.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent runs (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the initial network and write a checkpoint.
    Fit(Common),
    /// Error at the final time over a list of step counts.
    Convergence(Common),
    /// Every Gauss-Newton defect of a short run.
    Defects(Common),
    /// Final defect of one step over a grid of ε.
    EpsSweep(Common),
    /// Transport over several periods.
    Longtime(Common),
}

type CommandFn = fn(&ExperimentConfig, &std::path::Path) -> Result<Outcome>;

fn run(cli: Cli) -> Result<Outcome> {
    let (common, f): (&Common, CommandFn) = match &cli.command {
        Command::Fit(c) => (c, commands::cmd_fit),
        Command::Convergence(c) => (c, commands::cmd_convergence),
        Command::Defects(c) => (c, commands::cmd_defects),
        Command::EpsSweep(c) => (c, commands::cmd_eps_sweep),
        Command::Longtime(c) => (c, commands::cmd_longtime),
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg = commands::with_seed(ExperimentConfig::load(&common.config)?, common.seed);
    f(&cfg, &common.out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            for line in &outcome.summary {
                let _ = writeln!(stdout, "{line}");
            }
            for file in &outcome.files {
                let _ = writeln!(stdout, "wrote {}", file.display());
            }
            if outcome.flagged {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
