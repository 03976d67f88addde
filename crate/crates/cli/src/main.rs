//! `mitoforge` command-line front end.

mod commands;
mod config;
mod failure;
mod logging;

use clap::{Args, Parser, Subcommand};
use failure::{CliResult, Failure};
use log::LevelFilter;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "mitoforge", version, about = "Mitochondria shapes, occupancy fits and simulated fluorescence data")]
struct Cli {
    /// Worker threads for batch commands; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Validate inputs and configs, print the resolved config, write nothing.
    #[arg(long, global = true)]
    dry_run: bool,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Built-in microscope configurations.
    #[command(subcommand)]
    Presets(commands::presets::PresetsCmd),
    /// Segmented volumes: inspect, downsample, label components, crop.
    #[command(subcommand)]
    Volume(commands::volume::VolumeCmd),
    /// Triangle meshes: build from volumes, inspect, normalize.
    #[command(subcommand)]
    Mesh(commands::mesh::MeshCmd),
    /// Occupancy samples from a mesh.
    Sample(commands::implicit::SampleArgs),
    /// Fit an occupancy network to a sample file.
    Fit(commands::implicit::FitArgs),
    /// Evaluate a fitted network on points or a sample file.
    Eval(commands::implicit::EvalArgs),
    /// Mesh the decision surface of a fitted network.
    Extract(commands::implicit::ExtractArgs),
    /// Render a mesh as a fluorescence z-stack.
    Render(commands::render::RenderArgs),
    /// Shape and mask metrics.
    #[command(subcommand)]
    Metrics(commands::metrics::MetricsCmd),
    /// Dataset generation, splitting and verification.
    #[command(subcommand)]
    Dataset(commands::dataset::DatasetCmd),
}

/// Settings shared by every command.
pub struct Ctx {
    pub jobs: usize,
    pub dry_run: bool,
}

impl Ctx {
    /// Creates the output directory unless this is a dry run.
    pub fn prepare_out(&self, out: &Path) -> CliResult<()> {
        if !self.dry_run {
            std::fs::create_dir_all(out)?;
        }
        Ok(())
    }

    /// Logs the resolved settings; on a dry run also prints them.
    pub fn resolved(&self, command: &str, config: serde_json::Value) {
        let rec = json!({"command": command, "jobs": self.jobs, "dry_run": self.dry_run, "config": config});
        logging::event(log::Level::Info, "resolved_config", rec.clone());
        if self.dry_run {
            println!("{rec}");
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct OutArg {
    /// Output directory; nothing is written anywhere else.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::input(format!("input file not found: {}", path.display())))
    }
}

pub fn print_json(v: &serde_json::Value) {
    println!("{v}");
}

fn run(cli: Cli) -> CliResult<()> {
    if cli.jobs == 0 {
        return Err(Failure::config("--jobs must be >= 1"));
    }
    let ctx = Ctx {
        jobs: cli.jobs,
        dry_run: cli.dry_run,
    };
    match cli.command {
        Command::Presets(c) => commands::presets::run(&ctx, c),
        Command::Volume(c) => commands::volume::run(&ctx, c),
        Command::Mesh(c) => commands::mesh::run(&ctx, c),
        Command::Sample(a) => commands::implicit::sample(&ctx, a),
        Command::Fit(a) => commands::implicit::fit(&ctx, a),
        Command::Eval(a) => commands::implicit::eval(&ctx, a),
        Command::Extract(a) => commands::implicit::extract(&ctx, a),
        Command::Render(a) => commands::render::run(&ctx, a),
        Command::Metrics(c) => commands::metrics::run(&ctx, c),
        Command::Dataset(c) => commands::dataset::run(&ctx, c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let f = Failure::config(e.render().to_string().trim_end());
            logging::error_record(f.record());
            return ExitCode::from(f.exit_code());
        }
    };
    logging::init(cli.log_level);
    let started = std::time::Instant::now();
    match run(cli) {
        Ok(()) => {
            logging::event(log::Level::Info, "done", json!({"seconds": started.elapsed().as_secs_f64()}));
            ExitCode::SUCCESS
        }
        Err(f) => {
            logging::error_record(f.record());
            ExitCode::from(f.exit_code())
        }
    }
}
