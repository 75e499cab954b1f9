//! `pnsreg` command-line tool.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "pnsreg", version, about = "Compositional regression through principal nested spheres")]
struct Cli {
    /// Log more detail (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit PNS and the score regression, and write a model file.
    Fit(FitArgs),
    /// Predict compositions for new predictor rows.
    Predict(PredictArgs),
    /// Fit PNS only and report scores and variance explained.
    Pns(PnsArgs),
    /// Generate a dataset from the simulation design.
    Simulate(SimulateArgs),
    /// Cross-validated PMSE of the compared methods.
    Benchmark(BenchmarkArgs),
    /// Ternary diagram of three-part data with fitted PNS curves.
    PlotTernary(TernaryArgs),
    /// Biplot paths of scores 1 and 2 for a fitted model.
    PlotBiplot(BiplotArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SelectionArg {
    Bic,
    Variance,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Great,
    Small,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CircularArg {
    Wls,
    Vonmises,
}

/// How many PNS scores enter the regression.
#[derive(Clone, Copy, Debug, PartialEq)]
enum ScoreChoice {
    All,
    Count(usize),
    /// Smallest count whose cumulative variance share reaches the fraction.
    Variance(f64),
    CrossValidation,
}

impl FromStr for ScoreChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(ScoreChoice::All),
            "cv" => Ok(ScoreChoice::CrossValidation),
            _ => {
                if let Some(frac) = s.strip_prefix("var:") {
                    let f: f64 = frac.parse().map_err(|_| format!("bad fraction '{frac}'"))?;
                    if f > 0.0 && f <= 1.0 {
                        Ok(ScoreChoice::Variance(f))
                    } else {
                        Err("variance fraction must lie in (0, 1]".into())
                    }
                } else {
                    match s.parse::<usize>() {
                        Ok(k) if k >= 1 => Ok(ScoreChoice::Count(k)),
                        _ => Err(format!("expected all, a positive count, var:FRACTION or cv, got '{s}'")),
                    }
                }
            }
        }
    }
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(a) if a > 0.0 && a.is_finite() => Ok(a),
        _ => Err(format!("alpha must be a positive number, got '{s}'")),
    }
}

#[derive(Args, Debug, Clone)]
struct PnsOptions {
    /// Power transform exponent.
    #[arg(long, default_value = "0.5", value_parser = parse_alpha)]
    alpha: f64,
    /// Great/small rule at each level.
    #[arg(long, value_enum, default_value = "bic")]
    selection: SelectionArg,
    /// Use this subsphere kind at every level.
    #[arg(long, value_enum)]
    force_kind: Option<KindArg>,
}

#[derive(Args, Debug, Clone)]
struct DataColumns {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Composition part columns, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    response_cols: Vec<String>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    columns: DataColumns,
    /// Predictor columns, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    predictor_cols: Vec<String>,
    #[command(flatten)]
    pns: PnsOptions,
    /// all, a count K, var:FRACTION or cv.
    #[arg(long, default_value = "all")]
    scores: ScoreChoice,
    /// Model for the circular score.
    #[arg(long, value_enum, default_value = "wls")]
    circular: CircularArg,
    /// Splits used by `--scores cv`.
    #[arg(long, default_value_t = 20)]
    cv_splits: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV holding the model's predictor columns.
    #[arg(long)]
    data: PathBuf,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PnsArgs {
    #[command(flatten)]
    columns: DataColumns,
    #[command(flatten)]
    pns: PnsOptions,
    /// Model file holding the PNS fit.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV of scores, one row per observation.
    #[arg(long)]
    scores_out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Generator model file; the bundled generator when absent.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// Input CSV; a simulated dataset when absent.
    #[arg(long, requires_all = ["response_cols", "predictor_cols"])]
    data: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    response_cols: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    predictor_cols: Vec<String>,
    /// `all` or a comma-separated list of method names.
    #[arg(long, default_value = "all")]
    methods: String,
    #[arg(long, default_value_t = 100)]
    splits: usize,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Size of the simulated dataset.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Noise of the simulated dataset.
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    #[command(flatten)]
    pns: PnsOptions,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TernaryArgs {
    #[command(flatten)]
    columns: DataColumns,
    #[command(flatten)]
    pns: PnsOptions,
    /// Draw both the great and the small fit.
    #[arg(long, conflicts_with = "force_kind")]
    both_kinds: bool,
    /// Draw this fitted model instead of fitting one.
    #[arg(long, conflicts_with = "both_kinds")]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    grid: usize,
    /// SVG output.
    #[arg(long)]
    out: PathBuf,
    /// CSV of curve coordinates.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BiplotArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 101)]
    grid: usize,
    /// SVG output.
    #[arg(long)]
    out: PathBuf,
    /// Long-format CSV of the paths.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Predict(a) => commands::predict(a),
        Command::Pns(a) => commands::pns(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::PlotTernary(a) => commands::plot_ternary(a),
        Command::PlotBiplot(a) => commands::plot_biplot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
