//! `fbmc-chanest`: design preambles, verify the model's structural identities, run NMSE sweeps.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] fbmc_chanest::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use fbmc_chanest::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(
                E::Config(_) | E::Dimension { .. } | E::UnsupportedOverlap(_) | E::SparseSpacing { .. } | E::ZeroEnergy | E::Parse(_),
            ) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fbmc-chanest", version, about, args_override_self = true)]
#[command(after_help = "Any flag may also be given as key=value in a file passed with --config FILE; flags on the command line win.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Design a preamble and report its predicted MSE.
    Design(DesignArgs),
    /// Check the structural identities of the system model.
    Verify(VerifyArgs),
    /// Monte-Carlo NMSE-vs-SNR sweep with CSV and gnuplot output.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignKind {
    Full,
    Sparse,
    Iamc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Smoothing {
    None,
    Blue,
    Plain,
    Both,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Number of subcarriers (multiple of 4, at least 8).
    #[arg(long = "M", default_value_t = 64)]
    pub m: usize,
    /// Overlapping factor of the prototype filter (2, 3 or 4).
    #[arg(long = "K", default_value_t = 3)]
    pub k: usize,
    /// Channel length assumed by the design / estimator
    /// (defaults: design 8, verify 16, sweep the profile's length).
    #[arg(long = "Lh")]
    pub lh: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = DesignKind::Full)]
    pub kind: DesignKind,
    /// Preamble energy E.
    #[arg(long, default_value_t = 1.0)]
    pub energy: f64,
    /// First pilot of a sparse preamble.
    #[arg(long, default_value_t = 0)]
    pub p0: usize,
    /// SNR points (dB, σ² = 10^(-SNR/10)) at which predicted MSEs are listed: list `0,10,20` or range `0:10:40`.
    #[arg(long, default_value = "0:10:40")]
    pub snr: String,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Also check the two-pilot-symbol model.
    #[arg(long)]
    pub two_symbol: bool,
    /// Noise realizations for the covariance check.
    #[arg(long, default_value_t = 20_000)]
    pub trials: usize,
    /// Tolerance for the sparse structure G_k|P = α_k I.
    #[arg(long, default_value_t = 1e-9)]
    pub sparse_tol: f64,
    /// Flip the corner sign of the reference B used by the covariance check (fault injection).
    #[arg(long)]
    pub inject_corner_sign_error: bool,
    /// Write B and Γ (and B̄) as `re,im` CSV matrices into the output directory.
    #[arg(long)]
    pub dump: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Channel profile: low, high or flat.
    #[arg(long, default_value = "low")]
    pub profile: String,
    /// Comma-separated methods.
    #[arg(long, default_value = "td,iamc,iamc-td,cpofdm,cpofdm-td")]
    pub methods: String,
    /// Add frequency-smoothed IAM-C curves.
    #[arg(long, value_enum, default_value_t = Smoothing::None)]
    pub smoothing: Smoothing,
    /// SNR grid in dB: list `0,10,20` or range `0:5:50`.
    #[arg(long, default_value = "0:5:50")]
    pub snr: String,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Basename of the output files.
    #[arg(long, default_value = "sweep")]
    pub name: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match config::expand_args(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    let result = match cli.command {
        Command::Design(a) => commands::design(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Sweep(a) => commands::sweep(&a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
