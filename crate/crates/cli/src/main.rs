//! `flukefinder`: one entry point for every pipeline stage.
//!
//! Exit status is 0 on success, 1 when the work itself fails and 2 for
//! usage or configuration mistakes.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flukefinder::evaluation::ReportFormat;
use flukefinder::synthetic::SyntheticSpec;

use crate::commands::Ctx;
use crate::config::{Overrides, PipelineConfig};
use crate::error::{CliError, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "flukefinder", version, about = "Find and classify whale-encounter videos")]
struct Cli {
    /// JSON pipeline config; every key has a default.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Root seed; every stage derives its own from it.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// ONNX model file, or `builtin`.
    #[arg(long, global = true, value_name = "PATH|builtin")]
    backbone: Option<String>,
    /// Frames per standardized sequence.
    #[arg(long, global = true, value_name = "N")]
    frames: Option<usize>,
    /// Cross-validation folds.
    #[arg(long, global = true, value_name = "N")]
    folds: Option<usize>,
    /// Base directory for every relative path in the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Validate the config and print the plan without writing anything.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Query the platform and add anonymized candidates to the manifest.
    Search {
        /// Serve API responses from stored JSON files instead of the network.
        #[arg(long, value_name = "DIR")]
        fixtures: Option<PathBuf>,
        #[arg(long, value_name = "N")]
        limit: Option<usize>,
    },
    /// Download manifest videos through `fetch_command`.
    Fetch,
    /// Decode intervals into standardized frame tensors.
    PrepareFrames {
        /// Also cache full-length frame strips for unlabeled videos.
        #[arg(long)]
        strips: bool,
    },
    /// Run the backbone over frame tensors into the feature cache.
    ExtractFeatures,
    /// Train on all labeled features and write a checkpoint.
    Train,
    /// Stratified k-fold cross-validation with report files.
    Crossval,
    /// Score feature sequences with a checkpoint, one JSON line each.
    Predict {
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        /// Feature file stems or local ids in the feature cache.
        #[arg(value_name = "FEATURES")]
        inputs: Vec<String>,
    },
    /// Render fold reports from a cross-validation CSV.
    Report {
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        /// `text` or `csv`.
        #[arg(long, default_value = "text")]
        format: String,
    },
    /// Serve the annotation API.
    Annotate {
        #[arg(long, value_name = "ADDR")]
        bind: Option<String>,
    },
    /// Write a labeled synthetic feature corpus with a planted class signal.
    Synth {
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 31)]
        steps: usize,
        #[arg(long, default_value_t = 8)]
        dim: usize,
        /// Distance between class means in noise standard deviations.
        #[arg(long, default_value_t = 2.0)]
        separation: f64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let flags = Overrides {
        seed: cli.seed,
        backbone: cli.backbone,
        frames: cli.frames,
        folds: cli.folds,
        out: cli.out,
    };
    let ctx = Ctx {
        run: config.resolve(&flags)?,
        dry_run: cli.dry_run,
    };
    match cli.command {
        Command::Search { fixtures, limit } => commands::search(&ctx, fixtures.as_deref(), limit),
        Command::Fetch => commands::fetch(&ctx),
        Command::PrepareFrames { strips } => commands::prepare_frames(&ctx, strips),
        Command::ExtractFeatures => commands::extract_features(&ctx),
        Command::Train => commands::train(&ctx),
        Command::Crossval => commands::crossval(&ctx),
        Command::Predict { checkpoint, inputs } => commands::predict_cmd(&ctx, checkpoint.as_deref(), &inputs),
        Command::Report { input, format } => {
            let format: ReportFormat = format.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
            commands::report(&ctx, input.as_deref(), format)
        }
        Command::Annotate { bind } => commands::annotate(&ctx, bind.as_deref()),
        Command::Synth {
            count,
            steps,
            dim,
            separation,
        } => {
            if count < 2 || steps == 0 || dim == 0 || !(separation.is_finite() && separation >= 0.0) {
                return Err(CliError::Usage(
                    "synth needs count >= 2, steps >= 1, dim >= 1 and a finite non-negative separation".into(),
                ));
            }
            let spec = SyntheticSpec {
                count,
                steps,
                dim,
                separation,
                noise_sd: 1.0,
                seed: ctx.run.config.seed,
            };
            commands::synth(&ctx, spec)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
