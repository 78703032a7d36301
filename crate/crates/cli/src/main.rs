mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Time-lapse video curation toolkit.
#[derive(Debug, Parser)]
#[command(name = "lapsekit", version)]
pub struct RunConfig {
    /// Log filter, e.g. `warn`, `info`, `lapsekit=debug`.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect scene transitions and write a transition report.
    Segment(SegmentArgs),
    /// Choose frame indices for training clips.
    Sample(SampleArgs),
    /// Apply metadata filters to ingested manifest records.
    Filter(FilterArgs),
    /// Caption kept records and judge whether they are time-lapse footage.
    Caption(CaptionArgs),
    /// Summarize a manifest.
    Stats(StatsArgs),
    /// Mean frame-to-text embedding similarity of a video.
    Clipsim(ClipsimArgs),
    /// Run a DDIM trajectory against an analytic denoiser and report its error.
    Ddim(DdimArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Video files (`.cmrv`, or anything the external decoder understands).
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Decoder executable for non-CMRV inputs.
    #[arg(long)]
    pub decoder: Option<PathBuf>,
    /// Frame size requested from the decoder, `WxH`.
    #[arg(long, default_value = "64x64")]
    pub decode_size: String,
    /// Worker threads across inputs.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedderKind {
    Pixel,
    Http,
}

#[derive(Debug, Clone, Args)]
pub struct EmbedArgs {
    #[arg(long, value_enum, default_value_t = EmbedderKind::Pixel)]
    pub embedder: EmbedderKind,
    #[arg(long, env = "EMBED_ENDPOINT")]
    pub embed_endpoint: Option<String>,
    #[arg(long, default_value_t = 512)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 4)]
    pub embed_max_in_flight: usize,
}

#[derive(Debug, Clone, Args)]
pub struct DetectorArgs {
    /// Pixel-difference threshold.
    #[arg(long, default_value_t = 40.0)]
    pub theta: f64,
    /// Embedding-similarity threshold.
    #[arg(long, default_value_t = 0.5)]
    pub vartheta: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file; only valid with a single input. Defaults to stdout.
    #[arg(long, conflicts_with = "out_dir")]
    pub out: Option<PathBuf>,
    /// Output directory; one file per input, named after the input.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[command(flatten)]
    pub embed: EmbedArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Existing transition report; only valid with a single input.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[command(flatten)]
    pub embed: EmbedArgs,
    /// Frames per plan.
    #[arg(long, default_value_t = 16)]
    pub frames: usize,
    /// Probability of the preferred strategy.
    #[arg(long, default_value_t = 0.9)]
    pub prob: f64,
    /// Transition count above which a random window is preferred.
    #[arg(long, default_value_t = 3)]
    pub delta: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Destination manifest. Defaults to rewriting the input in place.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub min_title_chars: usize,
    #[arg(long, default_value_t = 100)]
    pub min_views: u64,
    /// Additional banned hashtag; repeatable.
    #[arg(long = "ban")]
    pub banned: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    Mock,
    Http,
}

#[derive(Debug, Args)]
pub struct CaptionArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Destination manifest. Defaults to rewriting the input in place.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory holding `<id>.cmrv` for every record.
    #[arg(long)]
    pub videos: PathBuf,
    #[arg(long, value_enum, default_value_t = ProviderKind::Mock)]
    pub provider: ProviderKind,
    #[arg(long, env = "CAPTION_ENDPOINT")]
    pub endpoint: Option<String>,
    #[arg(long, default_value_t = 4)]
    pub keyframes: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    /// Mock provider: captions containing this word are judged not time-lapse; repeatable.
    #[arg(long = "reject-marker")]
    pub reject_markers: Vec<String>,
    #[arg(long, default_value_t = 20)]
    pub min_title_chars: usize,
    #[arg(long, default_value_t = 100)]
    pub min_views: u64,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// JSON destination; the table then goes to stdout. Defaults to JSON on stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClipsimArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub text: String,
    #[command(flatten)]
    pub embed: EmbedArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DdimArgs {
    #[arg(long, default_value_t = 25)]
    pub steps: usize,
    #[arg(long, default_value_t = 8.0)]
    pub guidance: f64,
    /// Training steps in the noise schedule.
    #[arg(long = "t", default_value_t = 1000)]
    pub train_steps: usize,
    #[arg(long, default_value_t = 8.5e-4)]
    pub beta_start: f64,
    #[arg(long, default_value_t = 1.2e-2)]
    pub beta_end: f64,
    /// Share of batch entries whose conditioning is dropped.
    #[arg(long, default_value_t = 0.1)]
    pub null_ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `B,C,F,H,W`.
    #[arg(long, default_value = "1,1,1,4,4")]
    pub shape: String,
    /// Writes the final tensor in binary form.
    #[arg(long)]
    pub out_tensor: Option<PathBuf>,
    /// Report destination. Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let config = match RunConfig::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::new()
        .parse_filters(&config.log_level)
        .init();
    match commands::run(config.command) {
        Ok(commands::Outcome::Complete) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Partial { failed, total }) => {
            eprintln!("{failed} of {total} items failed");
            ExitCode::from(1)
        }
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("Run with --help for usage.");
            ExitCode::from(2)
        }
        Err(commands::Failure::Fatal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
