//! `slfg`: ingest videos into frame directories, build per-video scene
//! indexes, ask questions, evaluate datasets, and inspect stored indexes.

mod commands;
mod layers;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "slfg",
    version,
    about = "Scene-localized frame grouping for long-video question answering"
)]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,

    #[command(subcommand)]
    pub command: Command,
}

/// Flags that override the config file and SLFG_* environment variables.
/// Precedence: flag > environment > config file > built-in default.
#[derive(Debug, Args)]
pub struct Overrides {
    /// Path to a TOML config file (or set SLFG_CONFIG)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Sampling interval in seconds
    #[arg(long, global = true)]
    pub interval: Option<f64>,

    /// Frames per group
    #[arg(long, global = true)]
    pub group_size: Option<usize>,

    /// Score-gap threshold for the dynamic strategy
    #[arg(long, global = true)]
    pub threshold: Option<f64>,

    /// Selection strategy: top1, topn, or dynamic
    #[arg(long, global = true)]
    pub strategy: Option<String>,

    /// Frame budget of the answering model
    #[arg(long, global = true)]
    pub max_frames: Option<usize>,

    /// Group count for the topn strategy
    #[arg(long, global = true)]
    pub topn_n: Option<usize>,

    /// Directory holding stored scene indexes
    #[arg(long, global = true)]
    pub index_root: Option<PathBuf>,

    /// Directory holding per-video frame directories
    #[arg(long, global = true)]
    pub frames_root: Option<PathBuf>,

    /// Video-level parallelism for eval
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Use deterministic mock backends instead of remote endpoints
    #[arg(long, global = true)]
    pub mock: bool,

    /// JSON plantings for the mock backends (or set SLFG_MOCK_FIXTURES)
    #[arg(long, global = true)]
    pub mock_fixtures: Option<PathBuf>,

    /// Plan only: never call the answering model
    #[arg(long, global = true)]
    pub dry_run: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Populate a frame directory from a video file or a pre-extracted
    /// directory of frame_<t_ms>.jpg files
    Ingest {
        /// Video file or directory of pre-extracted frames
        input: PathBuf,
        /// Output frame directory (default: <frames-root>/<video-id>)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Video identifier (default: input file stem)
        #[arg(long)]
        video_id: Option<String>,
    },
    /// Build (or load) the scene index for a video
    Index { video_id: String },
    /// Answer a multiple-choice question about a video
    Ask {
        video_id: String,
        #[arg(long)]
        question: String,
        /// Repeatable labeled option, e.g. --option "A=a red car"
        #[arg(long = "option", value_name = "LABEL=TEXT")]
        options: Vec<String>,
    },
    /// Run a JSONL dataset through the pipeline and write reports
    Eval {
        dataset: PathBuf,
        /// Directory for report.json and report.txt (default: .)
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print a stored index's groups and scenes; with --question, the
    /// sorted group-score table
    Inspect {
        video_id: String,
        #[arg(long)]
        question: Option<String>,
    },
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("SLFG_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    if let Err(e) = commands::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
