//! Command-line front end for the benchmark pipeline.
//!
//! Thin wrapper over the pipeline module: each subcommand runs one stage
//! (or all of them) against a JSON config file, with a few flags that
//! override config fields for quick experiments.

use clap::{Parser, Subcommand};
use epbench::pipeline::{self, PipelineConfig, PipelineError, Stage};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "epbench", about = "Episodic-memory benchmark generator and evaluator")]
struct Cli {
    /// Path to the pipeline config JSON file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Use the offline mock author, judges and answerer.
    #[arg(long, global = true)]
    mock: bool,

    /// Override the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the closed universe of dates, locations, entities and contents.
    Universe,
    /// Sample events and their chapter meta-data from the universe.
    Events,
    /// Author, verify and assemble the narrative book.
    Book,
    /// Instantiate, corrupt and select questions; export the fine-tune set.
    Questions,
    /// Answer the selected questions under the configured memory mode.
    Answer,
    /// Judge answers and compute per-question scores.
    Judge,
    /// Aggregate scores into CSV and markdown reports.
    Report,
    /// Run every stage in order and print a summary.
    Pipeline,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let path = cli.config.as_ref().ok_or_else(|| {
        PipelineError::ConfigInvalid("--config is required".to_string())
    })?;
    let mut config = PipelineConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.mock {
        config.mock = true;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let config = load_config(cli)?;
    let stage = match cli.command {
        Command::Universe => Stage::Universe,
        Command::Events => Stage::Events,
        Command::Book => Stage::Book,
        Command::Questions => Stage::Questions,
        Command::Answer => Stage::Answer,
        Command::Judge => Stage::Judge,
        Command::Report => Stage::Report,
        Command::Pipeline => {
            let summary = pipeline::run_pipeline(&config)?;
            println!("{summary}");
            return Ok(());
        }
    };
    let executed = pipeline::run_stage(stage, &config)?;
    if executed {
        println!("stage '{}' completed", stage.name());
    } else {
        println!("stage '{}' up to date, skipped", stage.name());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err @ (PipelineError::ConfigInvalid(_) | PipelineError::Parse(_))) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
