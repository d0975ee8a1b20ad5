//! skelpipe: batch preprocessing and evaluation for skeleton-based
//! micro-gesture recognition.

mod commands;
mod config;
mod preprocess;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use skelpipe_core::topology::{builtin_topology, TopologySpec};

#[derive(Parser)]
#[command(name = "skelpipe", version, about = "Skeleton keypoint preprocessing pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render aligned joint/limb heatmap volumes for every manifest sample
    Preprocess(PreprocessArgs),
    /// Fuse per-stream score files and report Top-1 accuracy
    FuseEval(FuseEvalArgs),
    /// Per-class counts and sequence-length distribution of a manifest
    Stats(StatsArgs),
    /// Print a topology with hop distances and partition patterns
    TopologyDump(TopologyDumpArgs),
    /// Check every manifest sample against the shared invariants
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    /// Key-value config file; flags override file values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset manifest (sample_id,path,label,frame_count rows)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Built-in topology name (base22|face41) or a topology config file
    #[arg(long)]
    pub topology: Option<String>,
    /// Temporal alignment strategy (proposed|baseline)
    #[arg(long)]
    pub strategy: Option<String>,
    /// Clip length every sequence is aligned to
    #[arg(long)]
    pub target_length: Option<usize>,
    /// Seed for the baseline random crop
    #[arg(long)]
    pub seed: Option<u64>,
    /// Heatmap channel set (joint|limb|both)
    #[arg(long)]
    pub modality: Option<String>,
    /// Heatmap grid height
    #[arg(long)]
    pub height: Option<usize>,
    /// Heatmap grid width
    #[arg(long)]
    pub width: Option<usize>,
    /// Gaussian std in grid pixels
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Output directory for tensors and volumes.csv
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Worker pool size
    #[arg(long)]
    pub workers: Option<usize>,
    /// Crop-box expansion factor
    #[arg(long)]
    pub padding_ratio: Option<f64>,
    /// Minimum keypoint confidence to contribute
    #[arg(long)]
    pub confidence_floor: Option<f32>,
    /// Treat detections whose total body confidence falls below this as
    /// missing frames
    #[arg(long)]
    pub min_person_confidence: Option<f32>,
}

#[derive(Args, Debug)]
pub struct FuseEvalArgs {
    /// Score files, one per stream
    #[arg(required = true)]
    pub scores: Vec<PathBuf>,
    /// Comma-separated stream weights (default 1:1:...)
    #[arg(long)]
    pub weights: Option<String>,
    /// Label file (sample_id,label rows)
    #[arg(long)]
    pub labels: PathBuf,
    /// Apply a per-row softmax to each stream before fusing
    #[arg(long, default_value_t = false)]
    pub softmax: bool,
    /// Machine-readable report destination
    #[arg(long, default_value = "fusion_report.json")]
    pub report: PathBuf,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Args, Debug)]
pub struct TopologyDumpArgs {
    /// Built-in topology name or a topology config file
    #[arg(long)]
    pub topology: String,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "face41")]
    pub topology: String,
}

/// Loads a topology from a config file path, or by built-in name.
pub fn load_topology(value: &str) -> Result<TopologySpec> {
    let path = Path::new(value);
    if path.is_file() {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading topology `{}`", path.display()))?;
        Ok(TopologySpec::parse_config(&text)?)
    } else {
        Ok(builtin_topology(value)?)
    }
}

fn run(cli: Cli) -> Result<usize> {
    match cli.command {
        Command::Preprocess(args) => {
            let settings = config::resolve(&args)?;
            preprocess::run(&settings)
        }
        Command::FuseEval(args) => commands::fuse_eval(&args).map(|()| 0),
        Command::Stats(args) => commands::stats(&args).map(|()| 0),
        Command::TopologyDump(args) => commands::topology_dump(&args).map(|()| 0),
        Command::Validate(args) => commands::validate(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
