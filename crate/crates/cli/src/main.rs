//! `rfcgen`: generate, evaluate, analyse and benchmark random-field
//! composition test functions.

mod commands;
mod output;
mod presets;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use presets::{FamilyKind, Preset};

#[derive(Parser)]
#[command(
    name = "rfcgen",
    version,
    about = "Random-field composition test functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a spec from a family or preset and write it as JSON.
    Gen(GenArgs),
    /// Evaluate a spec at the points of a CSV file.
    Eval(EvalArgs),
    /// Evaluate a spec on a regular grid over one or two axes.
    Grid(GridArgs),
    /// Estimate first-order sensitivity indices.
    Sobol(SobolArgs),
    /// Recalibrate term weights to target variance shares.
    Calibrate(CalibrateArgs),
    /// Run the genetic algorithm on one spec.
    Bench(BenchArgs),
    /// Run a preset study over many generated instances.
    Study(StudyArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, conflicts_with = "family")]
    preset: Option<Preset>,
    #[arg(long, value_enum)]
    family: Option<FamilyKind>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r: Option<u32>,
    /// Exponent of the power-law variance shares (first-order family).
    #[arg(long)]
    k: Option<f64>,
    /// Maximum interaction order (interaction family).
    #[arg(long = "Q", alias = "q")]
    q: Option<usize>,
    /// Dimension of the full-order field.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo samples used for calibration.
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    spec: PathBuf,
    /// CSV with one point per row; a non-numeric first row is a header.
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 101)]
    points_per_axis: usize,
    /// Comma-separated varied axes; defaults to the first one or two.
    #[arg(long, value_delimiter = ',')]
    axes: Option<Vec<usize>>,
    /// Fixed point for the other axes: one value for all, or one per variable.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    slice: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SobolMethod {
    Pickfreeze,
    Anova,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SobolArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, value_enum, default_value_t = SobolMethod::Pickfreeze)]
    method: SobolMethod,
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Midpoint grid cells per axis for the ANOVA estimator.
    #[arg(long, default_value_t = 32)]
    cells: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Comma-separated share per term.
    #[arg(long, value_delimiter = ',', group = "target")]
    targets: Option<Vec<f64>>,
    /// CSV file with columns `term,share`.
    #[arg(long, group = "target")]
    targets_file: Option<PathBuf>,
    /// Power-law shares over the terms in order.
    #[arg(long, group = "target")]
    sigma_k: Option<f64>,
    /// Interaction-order shares.
    #[arg(long, group = "target")]
    interaction: bool,
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct GaArgs {
    #[arg(long, default_value_t = 100)]
    population: usize,
    /// Maximum objective evaluations per run.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    #[arg(long, default_value_t = 200_000)]
    reference_budget: u64,
    /// Seed mixed into every run seed.
    #[arg(long, default_value_t = 0)]
    ga_seed: u64,
    /// Per-run CSV output.
    #[arg(long)]
    runs: Option<PathBuf>,
    /// Summary CSV output; stdout when omitted.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Number of GA runs, seeds 0..N.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[command(flatten)]
    ga: GaArgs,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long, value_enum)]
    preset: Preset,
    /// Override the swept values.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Number of instances per setting, seeds 0..N.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long, default_value_t = 20_000)]
    calibration_samples: usize,
    #[command(flatten)]
    ga: GaArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = commands::configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code());
    }
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Eval(a) => commands::eval(a),
        Command::Grid(a) => commands::grid(a),
        Command::Sobol(a) => commands::sobol(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Bench(a) => commands::bench(a),
        Command::Study(a) => commands::study(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
