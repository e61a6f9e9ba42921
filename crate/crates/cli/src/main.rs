mod commands;
mod config;
mod failure;
mod output;
mod plot;
mod run;
mod setup;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use crate::commands::Context;
use crate::config::ExperimentConfig;
use crate::failure::Failure;
use crate::output::{resolve_out_dir, OutDir};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    /// Reconstruct one image with one solver.
    Solve,
    /// Run several solvers over several images and tabulate convergence.
    Compare,
    /// Regularization sweep over a shrinking noise ladder.
    Sweep,
    /// Lipschitz, symmetry and homogeneity diagnostics of a denoiser.
    Diagnose,
    /// PnP-ULA posterior sampling.
    Sample,
    /// Render trace CSVs as an SVG.
    Plot,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Compare => "compare",
            Command::Sweep => "sweep",
            Command::Diagnose => "diagnose",
            Command::Sample => "sample",
            Command::Plot => "plot",
        }
    }
}

/// Plug-and-play reconstruction, regularization and sampling experiments.
#[derive(Debug, Parser)]
#[command(name = "pnpkit", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output` or a directory named after the config hash.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed overriding the config; 0 when neither is given.
    #[arg(long)]
    seed: Option<u64>,
    /// Exit with status 3 when the command's check fails.
    #[arg(long)]
    assert: bool,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    cfg.seed = Some(seed);
    let out = OutDir::create(resolve_out_dir(cli.out.as_deref(), &cfg, cli.command.name()))?;
    out.write("config.json", cfg.to_json() + "\n")?;
    let ctx = Context {
        cfg,
        seed,
        out,
        assert: cli.assert,
    };
    match cli.command {
        Command::Solve => commands::solve(&ctx),
        Command::Compare => commands::compare(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Diagnose => commands::diagnose(&ctx),
        Command::Sample => commands::sample(&ctx),
        Command::Plot => plot::plot(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("pnpkit: {f}");
            f.exit_code()
        }
    }
}
