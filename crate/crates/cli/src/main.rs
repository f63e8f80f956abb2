//! `gfmfr`: synthetic data generation, experiment runs, ablations and LDP
//! sweeps for the federated multimodal recommendation simulator.

mod commands;
mod manifest;
mod overrides;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use overrides::ConfigFlags;

#[derive(Parser, Debug)]
#[command(name = "gfmfr", version, about = "Group-wise multimodal federated recommendation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a planted-group synthetic dataset.
    Synth(SynthArgs),
    /// Run one experiment.
    Run(RunArgs),
    /// Run a grouping or schedule ablation matrix.
    Ablate(AblateArgs),
    /// Run the experiment at LDP noise scales 0 through 5.
    LdpSweep(SweepArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    users: usize,
    #[arg(long, default_value_t = 500)]
    items: usize,
    /// Planted groups.
    #[arg(long, default_value_t = 4)]
    groups: usize,
    #[arg(long, default_value_t = 2)]
    modalities: usize,
    /// Width of each modality's features.
    #[arg(long, default_value_t = 16)]
    dim: usize,
    /// Interactions per user, including the held-out one.
    #[arg(long, default_value_t = 20)]
    interactions: usize,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    #[arg(long, default_value_t = 8)]
    latent_dim: usize,
    /// Scale of each user's taste offset from their group preference.
    #[arg(long, default_value_t = 0.3)]
    spread: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Write into a non-empty output directory.
    #[arg(long)]
    force: bool,
}

/// Options shared by every command that runs experiments.
#[derive(Args, Debug, Clone)]
pub struct RunOptions {
    /// Flat `key = value` config file.
    #[arg(long, conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// Repeat the run recorded in a manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Write into a non-empty output directory.
    #[arg(long)]
    force: bool,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// `key=value` override, applied after the file and before named flags.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    opts: RunOptions,
}

#[derive(Args, Debug)]
struct AblateArgs {
    /// `grouping`, `schedule` or `all`.
    #[arg(long, default_value = "grouping")]
    axis: String,
    /// Comma-separated subset of variants to run.
    #[arg(long, value_delimiter = ',')]
    variants: Vec<String>,
    #[command(flatten)]
    opts: RunOptions,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Comma-separated noise scales.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5")]
    deltas: Vec<f64>,
    #[command(flatten)]
    opts: RunOptions,
}

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Data(String),
    Numeric(String),
    Internal(String),
}

impl CliError {
    pub fn usage(m: impl Into<String>) -> Self {
        CliError::Usage(m.into())
    }
    pub fn config(m: impl Into<String>) -> Self {
        CliError::Config(m.into())
    }
    pub fn data(m: impl Into<String>) -> Self {
        CliError::Data(m.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Data(_) => 4,
            CliError::Numeric(_) => 5,
            CliError::Internal(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Config(m) | CliError::Data(m) | CliError::Numeric(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<gfmfr_core::Error> for CliError {
    fn from(e: gfmfr_core::Error) -> Self {
        use gfmfr_core::Error as E;
        let msg = e.to_string();
        match e.root() {
            E::Config(_) | E::InvalidArgument(_) => CliError::Config(msg),
            E::Parse { .. } | E::EmptyDataset(_) | E::Format { .. } | E::Io { .. } => CliError::Data(msg),
            E::NumericFailure { .. } => CliError::Numeric(msg),
            _ => CliError::Internal(msg),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Run(a) => commands::run(&a.opts),
        Command::Ablate(a) => commands::ablate(&a.axis, &a.variants, &a.opts),
        Command::LdpSweep(a) => commands::ldp_sweep(&a.deltas, &a.opts),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
