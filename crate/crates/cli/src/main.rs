//! `trendbreak` command-line front end.

mod commands;
mod heatmap;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use output::UsageError;

const EXIT_USAGE: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "trendbreak", version, about = "Single change-point detection in linear trends")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full analysis of one `year,value` series: fits, criteria, test.
    Fit(FitArgs),
    /// RMS error of the dual fit at every admissible change year.
    Scan(ScanArgs),
    /// Generate one synthetic series.
    Synth(SynthArgs),
    /// Detection and model-selection statistics over a synthetic ensemble.
    Ensemble(EnsembleArgs),
    /// Monte Carlo slope-gap test of one series.
    McTest(McTestArgs),
    /// Area-weighted mean over the valid land cells of a grid.
    GlobalMean(GlobalMeanArgs),
    /// Analyse every valid land cell of a grid.
    Batch(BatchArgs),
    /// Heatmaps from a results CSV.
    Map(MapArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutFormat {
    Csv,
    Json,
    Ppm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseArg {
    White,
    Arfima,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridFormatArg {
    Auto,
    Csv,
    Daily,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignificanceArg {
    Off,
    Shared,
    PerCell,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Years excluded from the change-point search at each end.
    #[arg(long, default_value_t = 10)]
    pub margin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory; single-result commands print to stdout without it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output formats, comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub format: Vec<OutFormat>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct NullArgs {
    /// Surrogates in the Monte Carlo null ensemble.
    #[arg(long, default_value_t = 1000)]
    pub ensemble_size: usize,
    /// Noise of the null surrogates.
    #[arg(long, value_enum, default_value_t = NoiseArg::White)]
    pub noise: NoiseArg,
    /// ARFIMA memory parameter; estimated from the residuals when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub d: Option<f64>,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FitArgs {
    /// Series CSV with header `year,value`.
    pub input: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub null: NullArgs,
    /// Skip the Monte Carlo significance test.
    #[arg(long)]
    pub no_test: bool,
    /// Only use years from this one on.
    #[arg(long)]
    pub from_year: Option<i32>,
    /// Only use years up to this one.
    #[arg(long)]
    pub to_year: Option<i32>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ScanArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub common: Common,
    /// Candidates must lie within this factor of the smallest RMS error.
    #[arg(long, default_value_t = 1.02)]
    pub closeness: f64,
    /// Allow margins below 2 (edge-pathology demonstrations).
    #[arg(long)]
    pub diagnostic: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SeriesModel {
    #[arg(long, default_value_t = 70)]
    pub years: usize,
    #[arg(long, default_value_t = 1)]
    pub start_year: i32,
    /// Time index (1-based) of the trend change.
    #[arg(long, default_value_t = 35)]
    pub change_index: usize,
    /// Generate a single trend without a change.
    #[arg(long)]
    pub no_change: bool,
    /// Slope before the change, unit/year.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub slope1: f64,
    /// Slope after the change, unit/year.
    #[arg(long, default_value_t = 0.04, allow_hyphen_values = true)]
    pub slope2: f64,
    #[arg(long, default_value_t = 0.45)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value_t = NoiseArg::White)]
    pub noise: NoiseArg,
    /// ARFIMA memory parameter (required with `--noise arfima`).
    #[arg(long, allow_hyphen_values = true)]
    pub d: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SynthArgs {
    #[command(flatten)]
    pub model: SeriesModel,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub model: SeriesModel,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1000)]
    pub members: usize,
    /// Run the white-noise slope-gap test on every member.
    #[arg(long)]
    pub test: bool,
    /// Null ensemble size for `--test`.
    #[arg(long, default_value_t = 1000)]
    pub ensemble_size: usize,
    /// Six runs: white, H = 0.65 and H = 0.8 noise, each with and without a
    /// change; writes one delta-BIC file per run.
    #[arg(long)]
    pub sweep: bool,
    /// Allow margins below 2.
    #[arg(long)]
    pub diagnostic: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct McTestArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub null: NullArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GridInput {
    /// Grid file (annual CSV, daily CSV or packed binary).
    pub grid: PathBuf,
    #[arg(long, value_enum, default_value_t = GridFormatArg::Auto)]
    pub grid_format: GridFormatArg,
    /// Days needed for an annual mean when reading daily data.
    #[arg(long, default_value_t = 300)]
    pub min_days: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GlobalMeanArgs {
    #[command(flatten)]
    pub input: GridInput,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BatchArgs {
    #[command(flatten)]
    pub input: GridInput,
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = SignificanceArg::Off)]
    pub significance: SignificanceArg,
    #[command(flatten)]
    pub null: NullArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MapArgs {
    /// Results CSV written by `batch`.
    pub results: PathBuf,
    /// Grid the results came from; supplies the full axes.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<trendbreak::Error>() {
        Some(trendbreak::Error::Parse { .. } | trendbreak::Error::Structure(_)) => EXIT_PARSE,
        Some(trendbreak::Error::Config(_)) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Scan(a) => commands::scan(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Ensemble(a) => commands::ensemble(&a),
        Command::McTest(a) => commands::mc_test(&a),
        Command::GlobalMean(a) => commands::global_mean(&a),
        Command::Batch(a) => commands::batch(&a),
        Command::Map(a) => commands::map(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
