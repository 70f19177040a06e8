use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{CommandFactory, Parser, Subcommand};

use layerfield_cli::commands::{self, RunContext};
use layerfield_cli::config;

/// Phaseless inverse source experiments in a two-layered medium.
#[derive(Parser, Debug)]
#[command(name = "layerfield", version)]
struct Cli {
    /// TOML experiment configuration (overrides the preset).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in experiment preset.
    #[arg(long, global = true, value_parser = config::PRESETS)]
    preset: Option<String>,
    /// Output directory for all artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    output: Option<PathBuf>,
    /// Worker threads (0 = all cores). Does not affect results.
    #[arg(long, global = true, value_name = "K")]
    workers: Option<usize>,
    /// Noise seed; replaces the configured seed list.
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the lattice, phased far field and phaseless measurements.
    Synthesize,
    /// Recover phases from a phaseless file.
    Retrieve {
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        /// Exact phased far field for error metrics.
        #[arg(long, value_name = "PATH")]
        exact: Option<PathBuf>,
    },
    /// Fourier coefficients and grid reconstruction from phased or retrieved data.
    Invert {
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Synthesize, add noise, retrieve, invert and evaluate in one run.
    Pipeline,
    /// Error metrics of a retrieval file against the exact far field.
    Evaluate {
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        exact: Option<PathBuf>,
    },
}

fn run(cli: Cli, command: Command) -> Result<()> {
    let mut cfg = config::load(cli.config.as_deref(), cli.preset.as_deref())?;
    if let Some(o) = cli.output {
        cfg.output = o;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.noise.seeds = vec![s];
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let ctx = RunContext::new(cfg)?;
    pool.install(|| match command {
        Command::Synthesize => commands::synthesize(&ctx),
        Command::Retrieve { input, exact } => commands::retrieve(&ctx, input, exact),
        Command::Invert { input } => commands::invert_cmd(&ctx, input),
        Command::Pipeline => commands::pipeline(&ctx),
        Command::Evaluate { input, exact } => commands::evaluate(&ctx, input, exact),
    })
}

fn main() -> ExitCode {
    let mut cli = Cli::parse();
    let Some(command) = cli.command.take() else {
        let _ = Cli::command().print_help();
        return ExitCode::from(2);
    };
    match run(cli, command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
