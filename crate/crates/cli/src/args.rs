use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use softblend::harness::{EstimatedModelKind, ExcitationKind};

/// Gaussian-process feed-forward with variance-gated feedback.
///
/// Exit codes: 0 success; 1 config error, bad or missing input file;
/// 2 simulation divergence or optimization failure; 3 I/O error on output.
#[derive(Debug, Parser)]
#[command(name = "softblend", version)]
pub struct Cli {
    /// TOML experiment config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; the excitation and optimizer seeds are derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output file of the subcommand.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Drive the robot open-loop and record a training set.
    Collect(CollectArgs),
    /// Optimize hyperparameters on a dataset and save the model.
    Train(TrainArgs),
    /// Closed-loop sinusoid tracking with the trained model.
    Track(TrackArgs),
    /// Hold two operating points and measure the deflection under a probe torque.
    Probe(ProbeArgs),
    /// Summarize logs and probe reports; writes a plot-ready CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CollectArgs {
    /// Excitation length, s.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<ExcitationKind>,
    /// Peak force deviation, N.
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Force bias, N.
    #[arg(long)]
    pub offset: Option<f64>,
    #[arg(long)]
    pub band_low: Option<f64>,
    #[arg(long)]
    pub band_high: Option<f64>,
    /// Points kept after decimation.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, value_parser = parse_model)]
    pub estimated_model: Option<EstimatedModelKind>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// rad
    #[arg(long, allow_hyphen_values = true)]
    pub offset: Option<f64>,
    /// rad
    #[arg(long, allow_hyphen_values = true)]
    pub amplitude: Option<f64>,
    /// Hz
    #[arg(long)]
    pub frequency: Option<f64>,
    /// s
    #[arg(long)]
    pub duration: Option<f64>,
    /// Reflect the reference into the negative half-plane.
    #[arg(long)]
    pub mirrored: bool,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// N·m
    #[arg(long, allow_hyphen_values = true)]
    pub torque: Option<f64>,
    /// rad
    #[arg(long)]
    pub operating_point: Option<f64>,
    #[arg(long)]
    pub segment: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Trajectory logs written by `track`.
    #[arg(long = "log")]
    pub logs: Vec<PathBuf>,
    /// Stiffness reports written by `probe`.
    #[arg(long = "probe")]
    pub probes: Vec<PathBuf>,
}

fn parse_kind(s: &str) -> Result<ExcitationKind, String> {
    match s {
        "multisine" => Ok(ExcitationKind::Multisine),
        "chirp" => Ok(ExcitationKind::Chirp),
        "ramp-hold" => Ok(ExcitationKind::RampHold),
        _ => Err(format!("unknown excitation kind {s:?} (multisine, chirp, ramp-hold)")),
    }
}

fn parse_model(s: &str) -> Result<EstimatedModelKind, String> {
    match s {
        "zero" => Ok(EstimatedModelKind::Zero),
        "rigid-inverse" => Ok(EstimatedModelKind::RigidInverse),
        _ => Err(format!("unknown estimated model {s:?} (zero, rigid-inverse)")),
    }
}
