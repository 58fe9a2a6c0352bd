//! `turnover`: spectral turnover-reduction analysis from the command line.
//!
//! Exit status is 0 on success, 2 for invalid input and 3 for numerical failures.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "turnover", version, about = "Estimate turnover reduction across many alpha streams")]
struct Cli {
    /// JSON object whose keys are long flag names of the chosen subcommand
    /// (e.g. {"kmax": 10, "deform": true}); flags given on the command line win.
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spectral summary (rho*, rho', gamma, cluster-count bound) of a panel or correlation matrix.
    Analyze(AnalyzeArgs),
    /// Residual-correlation sweep over K removed components, with the knee of the curve.
    Clusters(ClustersArgs),
    /// Eigenstructure and rho* of a factor model given as JSON.
    Model(ModelArgs),
    /// Generate a synthetic binary cluster model and a return panel drawn from it.
    Synth(SynthArgs),
    /// Test whether a proposed extra cluster is supported by the cross-section.
    Ftest(FtestArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NaArg {
    /// Empty cells are missing.
    Empty,
    /// The literal NA is missing.
    Literal,
}

impl From<NaArg> for turnover_core::NaPolicy {
    fn from(a: NaArg) -> Self {
        match a {
            NaArg::Empty => Self::EmptyCell,
            NaArg::Literal => Self::LiteralNa,
        }
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct AnalyzeArgs {
    /// Panel CSV: `time` column followed by one column per alpha.
    #[arg(required_unless_present = "corr", conflicts_with = "corr")]
    panel: Option<PathBuf>,
    /// Start from a correlation-matrix CSV instead of a panel.
    #[arg(long, value_name = "CSV")]
    corr: Option<PathBuf>,
    /// Factor-return panel to regress out of every alpha first.
    #[arg(long, value_name = "CSV", conflicts_with = "corr")]
    factors: Option<PathBuf>,
    /// Repair a singular or indefinite correlation matrix before the spectral step.
    #[arg(long)]
    deform: bool,
    /// Keep the input sign basis instead of canonicalising signs.
    #[arg(long)]
    no_canonicalize: bool,
    /// Minimum jointly observed rows per pair of alphas.
    #[arg(long, default_value_t = turnover_core::panel::DEFAULT_MIN_OVERLAP)]
    min_overlap: usize,
    /// Relative eigenvalue floor used by --deform.
    #[arg(long, default_value_t = turnover_core::panel::DEFAULT_NOISE_FLOOR)]
    noise_floor: f64,
    /// Spelling of missing cells in panel CSVs.
    #[arg(long, value_enum, default_value = "empty")]
    na: NaArg,
    /// Write the JSON report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct ClustersArgs {
    /// Correlation-matrix CSV.
    corr: PathBuf,
    /// Largest number of removed components; must be below N.
    #[arg(long)]
    kmax: usize,
    /// Repair the matrix first when it is not positive definite.
    #[arg(long)]
    deform: bool,
    /// Relative eigenvalue floor used by --deform.
    #[arg(long, default_value_t = turnover_core::panel::DEFAULT_NOISE_FLOOR)]
    noise_floor: f64,
    /// The curve is flat once |zeta1| drops by less than this fraction over the window.
    #[arg(long, default_value_t = turnover_core::clusters::DEFAULT_REL_DROP)]
    rel_drop: f64,
    /// Look-ahead window (in K) of the knee rule.
    #[arg(long, default_value_t = turnover_core::clusters::DEFAULT_WINDOW)]
    window: usize,
    /// Directory receiving sweep.csv and knee.json.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[command(subcommand)]
    action: ModelAction,
}

#[derive(Debug, Subcommand)]
enum ModelAction {
    /// Distinct eigenvalues with multiplicities, rho* and the route used.
    Eigen(EigenArgs),
    /// rho* with a tag naming the method.
    RhoStar(RhoStarArgs),
    /// Largest eigenvalue of the uniform-correlation cluster matrix over a grid of rho (CSV `rho,psi_star`).
    RhoCurve(RhoCurveArgs),
    /// Minimal rho* for F = 1..fmax equal clusters (CSV `F,rho_star_min`).
    SweepF(SweepFArgs),
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct EigenArgs {
    /// Model JSON.
    model: PathBuf,
    /// Diagonalise the assembled N x N matrix instead of using a reduced route.
    #[arg(long)]
    dense: bool,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RhoMethod {
    /// Closed form for binary models with diagonal factor covariance, else a reduced route.
    Auto,
    /// Assembled N x N correlation matrix.
    Dense,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct RhoStarArgs {
    /// Model JSON.
    model: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    method: RhoMethod,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct RhoCurveArgs {
    /// Binary model JSON; only its cluster sizes are used.
    model: PathBuf,
    /// Comma-separated values of rho in [0, 1]; defaults to 0, 0.01, ..., 0.99.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct SweepFArgs {
    /// Model JSON; fixes N.
    model: PathBuf,
    /// Largest number of clusters; at most N.
    #[arg(long)]
    fmax: usize,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SizesArg {
    /// Sizes as equal as possible.
    Equal,
    /// Uniform multinomial assignment, redrawn until no cluster is empty.
    Random,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of alphas N.
    #[arg(long, default_value_t = 40)]
    n_alphas: usize,
    /// Number of clusters F.
    #[arg(long, default_value_t = 4)]
    n_clusters: usize,
    /// Number of panel rows.
    #[arg(long, default_value_t = 1000)]
    n_obs: usize,
    /// Factor-variance range `low,high` (or one value).
    #[arg(long, value_parser = parse_range, default_value = "1,1")]
    phi_range: (f64, f64),
    /// Specific-risk range `low,high` (or one value).
    #[arg(long, value_parser = parse_range, default_value = "1,1")]
    xi_range: (f64, f64),
    /// Constant factor correlation in [0, 1), or `random` for a random SPD correlation.
    #[arg(long, default_value = "0")]
    factor_rho: String,
    #[arg(long, value_enum, default_value = "equal")]
    sizes: SizesArg,
    /// Directory receiving panel.csv and model.json.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
struct FtestArgs {
    /// Panel of the N alphas covered by the old loadings.
    panel: PathBuf,
    /// Old binary loadings CSV (`alpha,cluster`, 1-based).
    omega_old: PathBuf,
    /// Panel of all N' alphas, on the same time labels.
    panel_new: PathBuf,
    /// New binary loadings CSV with one extra cluster.
    omega_new: PathBuf,
    /// Winsorisation quantile applied to both F-statistic series.
    #[arg(long, default_value_t = turnover_core::clusters::DEFAULT_WINSOR)]
    winsor: f64,
    #[arg(long, value_enum, default_value = "empty")]
    na: NaArg,
    /// Directory receiving ftest.csv and verdict.json.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    match parts.as_slice() {
        [x] => num(x).map(|v| (v, v)),
        [lo, hi] => Ok((num(lo)?, num(hi)?)),
        _ => Err("expected `low,high` or a single value".into()),
    }
}

fn main() {
    let args = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    };
    let cli = Cli::parse_from(args);
    if let Err(e) = commands::run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
