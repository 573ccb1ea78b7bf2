//! `vtmot`: batch front end for dataset checks, statistics, evaluation,
//! tracking, synthetic data generation and the fusion-module demo.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vtmot_pfm::fusion::Variant;

mod data;
mod fusion;
mod output;
mod tracking;

#[derive(Parser, Debug)]
#[command(name = "vtmot", version, about = "Visible-thermal multi-object tracking toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check sequence trees against the dataset format.
    Validate(ValidateArgs),
    /// Dataset totals, per-class counts and the box-scale histogram.
    Stats(StatsArgs),
    /// Score tracker results against ground truth (CLEAR, IDF1, HOTA).
    Evaluate(EvaluateArgs),
    /// Run the baseline tracker on each sequence's det/det.txt.
    Track(TrackArgs),
    /// Run the fusion module on a fixture directory and verify its gradients.
    PfmDemo(PfmDemoArgs),
    /// Central-difference gradient check on the toy fusion configuration.
    Gradcheck(GradcheckArgs),
    /// Write seeded synthetic sequences.
    Gen(GenArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Machine,
}

#[derive(Args, Debug, Clone, Copy)]
struct Common {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Upper bound on sequences processed at once.
    #[arg(long, env = "VTMOT_JOBS", default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// A dataset directory or a single sequence directory.
    #[arg(long, value_name = "DIR")]
    dataset: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["dataset", "frames"]))]
struct StatsArgs {
    /// Compute statistics over a dataset directory.
    #[arg(long, value_name = "DIR")]
    dataset: Option<PathBuf>,
    /// Total frame count (counts-only mode).
    #[arg(long, requires_all = ["boxes", "videos"])]
    frames: Option<u64>,
    /// Total box count (counts-only mode).
    #[arg(long, requires = "frames")]
    boxes: Option<u64>,
    /// Number of videos (counts-only mode).
    #[arg(long, requires = "frames")]
    videos: Option<u64>,
    /// Frame rate shared by every video (counts-only mode).
    #[arg(long, requires = "frames", default_value_t = 25.0)]
    frame_rate: f64,
    /// Also report the scale bin of these box areas in px².
    #[arg(long = "area", value_name = "PX2")]
    areas: Vec<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ProtocolArg {
    #[value(name = "1", alias = "I")]
    One,
    #[value(name = "2", alias = "II")]
    Two,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Dataset directory holding the ground truth.
    #[arg(long, value_name = "DIR")]
    gt: PathBuf,
    /// Directory of result files named `<sequence>.txt`.
    #[arg(long, value_name = "DIR")]
    res: PathBuf,
    /// 1: all sequences together; 2: one group per capture platform.
    #[arg(long, value_enum, default_value_t = ProtocolArg::One)]
    protocol: ProtocolArg,
    /// IoU threshold for CLEAR and IDF1 matching.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct TrackArgs {
    /// Dataset directory; every sequence needs det/det.txt.
    #[arg(long, value_name = "DIR")]
    dataset: PathBuf,
    /// Directory receiving one `<sequence>.txt` per sequence.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Minimum IoU between a predicted track and a detection.
    #[arg(long)]
    iou_threshold: Option<f64>,
    /// Frames a confirmed track survives without a match.
    #[arg(long)]
    max_age: Option<u32>,
    /// Minimum score for a detection to start a track.
    #[arg(long)]
    score_birth: Option<f64>,
    /// IoU at which visible and infrared duplicates merge.
    #[arg(long)]
    nms_threshold: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct PfmDemoArgs {
    /// Fixture directory: params.json, vis_t/vis_prev/ir_t/ir_prev PNGs and
    /// prev_objects.txt.
    #[arg(long, value_name = "DIR")]
    fixture: PathBuf,
    /// Write a random fixture into the directory first.
    #[arg(long)]
    init: bool,
    /// Seed for `--init`.
    #[arg(long, default_value_t = 0, requires = "init")]
    seed: u64,
    /// Fusion variant for `--init`.
    #[arg(long, default_value = "full", requires = "init")]
    variant: Variant,
    /// Write the output and every intermediate as a key → array document.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Skip the gradient check.
    #[arg(long)]
    skip_check: bool,
    #[command(flatten)]
    check: CheckArgs,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args, Debug, Clone, Copy)]
struct CheckArgs {
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    /// Largest relative error reported as PASS.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Target {
    Softmax,
    LayerNorm,
    Attention,
    Ffn,
    Pfm,
    All,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    /// Which block to check.
    #[arg(long, value_enum, default_value_t = Target::Pfm)]
    target: Target,
    /// Fusion variant for the pfm target, or `all`.
    #[arg(long, default_value = "full", value_parser = parse_variant_choice)]
    variant: VariantChoice,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    check: CheckArgs,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

/// One fusion variant, or every one of them.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
struct VariantChoice(Option<Variant>);

impl VariantChoice {
    fn variants(self) -> Vec<Variant> {
        self.0.map_or_else(|| Variant::ALL.to_vec(), |v| vec![v])
    }
}

fn parse_variant_choice(s: &str) -> Result<VariantChoice, String> {
    if s == "all" {
        return Ok(VariantChoice(None));
    }
    s.parse()
        .map(|v| VariantChoice(Some(v)))
        .map_err(|e: vtmot_pfm::PfmError| e.to_string())
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MotionArg {
    Linear,
    Crossing,
    Stationary,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Dataset directory to create.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Number of sequences; defaults to the platform-mix total.
    #[arg(long)]
    sequences: Option<u32>,
    /// Platform counts such as `handheld=58,surveillance=40,uav=22`.
    #[arg(long, value_name = "MIX")]
    platform_mix: Option<String>,
    #[arg(long, default_value_t = 3)]
    tracks: u32,
    #[arg(long, default_value_t = 50)]
    frames: u32,
    #[arg(long, value_enum, default_value_t = MotionArg::Linear)]
    motion: MotionArg,
    /// Probability that a ground-truth box yields no detection.
    #[arg(long, default_value_t = 0.0)]
    drop_rate: f64,
    /// Uniform jitter half-width of detection coordinates in px.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    /// Expected false-positive detections per frame.
    #[arg(long, default_value_t = 0.0)]
    fp_rate: f64,
    /// Seed of the first sequence; sequence k uses seed + k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write perfect-tracker result files into this directory.
    #[arg(long, value_name = "DIR")]
    oracle_results: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate(a) => data::validate(&a),
        Command::Stats(a) => data::stats(&a),
        Command::Evaluate(a) => tracking::evaluate(&a),
        Command::Track(a) => tracking::track(&a),
        Command::PfmDemo(a) => fusion::demo(&a),
        Command::Gradcheck(a) => fusion::gradcheck(&a),
        Command::Gen(a) => data::gen(&a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
