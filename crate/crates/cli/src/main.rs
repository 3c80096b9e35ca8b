//! `matteforge` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid arguments or inputs,
//! 3 pipeline failure (the message names the stage).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use matteforge::imaging::BoundingBox;

#[derive(Debug, Parser)]
#[command(name = "matteforge", version, about = "Foreground extraction with multi-resolution segmentation and matting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract the object inside a box from one image.
    Segment(SegmentArgs),
    /// Evaluate strategies over a dataset manifest.
    Bench(BenchArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Write the synthetic disk corpus and its manifest.
    Fixtures(FixturesArgs),
}

#[derive(Debug, clap::Args)]
struct SegmentArgs {
    #[arg(long)]
    input: PathBuf,
    /// Box as X,Y,W,H in pixels.
    #[arg(long)]
    bbox: BoundingBox,
    #[arg(long)]
    out: PathBuf,
    /// Use the candidate at this factor instead of the automatic choice.
    #[arg(long)]
    override_factor: Option<usize>,
    /// Also write the matte, trimap, pre-refinement mask, candidates and a manifest.
    #[arg(long)]
    dump_intermediates: bool,
    /// Flat TOML file of settings; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    pipeline: config::PipelineFlags,
}

#[derive(Debug, clap::Args)]
struct BenchArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Save every predicted mask under OUT/masks.
    #[arg(long)]
    write_masks: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    bench: config::BenchFlags,
    #[command(flatten)]
    pipeline: config::PipelineFlags,
}

#[derive(Debug, clap::Args)]
struct ServeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    serve: config::ServeFlags,
    #[command(flatten)]
    pipeline: config::PipelineFlags,
}

#[derive(Debug, clap::Args)]
struct FixturesArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 200)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match commands::init_threads() {
        Ok(t) => t,
        Err(e) => return e.report(),
    };
    let outcome = match cli.command {
        Command::Segment(a) => commands::segment(a),
        Command::Bench(a) => commands::bench(a, threads),
        Command::Serve(a) => commands::serve(a),
        Command::Fixtures(a) => commands::fixtures(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
