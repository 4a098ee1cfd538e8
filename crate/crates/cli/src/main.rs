mod commands;
mod config;
mod errors;
mod files;
mod log;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde_json::json;

use commands::{annotations, blend, detect, evaluate, pipeline, synth};
use config::PipelineConfig;

/// Synthetic training data, tiled inference plumbing and evaluation for
/// structural damage segmentation.
#[derive(Debug, Parser)]
#[command(name = "damagekit", version)]
struct Cli {
    /// TOML config; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (all cores by default). Outputs do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse VIA polygons or a manifest, report counts, optionally write the canonical manifest.
    ValidateAnnotations(annotations::ValidateArgs),
    /// Poisson seamless cloning of a source patch into a destination.
    Blend(blend::BlendArgs),
    /// Generate labeled collage images from exemplar crops and backgrounds.
    Synth(synth::SynthArgs),
    /// Cut an image into overlapping windows.
    Tile(detect::TileArgs),
    /// Emit predictions from ground truth with a deterministic stand-in detector.
    MockDetect(detect::MockArgs),
    /// Merge per-window predictions into one full-frame set.
    Merge(detect::MergeArgs),
    /// Precision, recall and aggregate IoU across confidence thresholds.
    Eval(evaluate::EvalArgs),
    /// Physical instance areas from a reference of known size.
    Measure(evaluate::MeasureArgs),
    /// annotations → tile → mock-detect → merge → eval in one run.
    Pipeline(pipeline::PipelineArgs),
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => config::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(errors::usage("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow::anyhow!("starting worker pool: {e}"))?;
    }
    match cli.command {
        Command::ValidateAnnotations(a) => annotations::run(a, &config),
        Command::Blend(a) => blend::run(a, &config),
        Command::Synth(a) => synth::run(a, &config, cli.workers),
        Command::Tile(a) => detect::run_tile(a, &config),
        Command::MockDetect(a) => detect::run_mock(a, &config),
        Command::Merge(a) => detect::run_merge(a, &config),
        Command::Eval(a) => evaluate::run_eval(a, &config),
        Command::Measure(a) => evaluate::run_measure(a, &config),
        Command::Pipeline(a) => pipeline::run(a, &config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { errors::EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = errors::exit_code(&err);
            log::error("failed", json!({ "message": format!("{err:#}"), "exit_code": code }));
            ExitCode::from(code)
        }
    }
}
