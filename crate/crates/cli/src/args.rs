use std::path::PathBuf;

use alpha_audit::calibration::DEFAULT_BINS;
use alpha_audit::sharpestats::SharpeConvention;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "alpha-audit",
    version,
    about = "Audit recorded trading-agent backtests"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay a decision log and write the gross/net results bundle.
    Backtest(BacktestArgs),
    /// Evaluate all six protocols and grade the claimed tier.
    Audit(AuditArgs),
    /// Sharpe standard error, confidence interval, zero-coverage boundary and t-hurdle.
    Sharpe(SharpeArgs),
    /// Expected calibration error and reliability curve.
    Calibrate(CalibrateArgs),
    /// Flip rates, monotonicity verdict and sector bias scores.
    Counterfactual(CounterfactualArgs),
    /// Disagreement, role similarity and multi-agent net-return delta.
    Disaggregate(DisaggregateArgs),
    /// Friction coverage matrix for a set of systems.
    Coverage(CoverageArgs),
}

fn parse_k(s: &str) -> Result<SharpeConvention, String> {
    match s {
        "1" => Ok(SharpeConvention::Period),
        "252" => Ok(SharpeConvention::Annualized),
        _ => Err(format!("K must be 1 or 252, got {s}")),
    }
}

fn parse_level(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("level must be in (0, 1), got {v}"))
    }
}

fn parse_bins(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(m) if m >= 1 => Ok(m),
        _ => Err(format!("bins must be a positive integer, got {s}")),
    }
}

/// Inputs shared by the commands that replay a decision log.
#[derive(Debug, Clone, Args)]
pub struct RunInputs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory of `<TICKER>.csv` price files.
    #[arg(long)]
    pub prices: PathBuf,
    /// Line-delimited decision records.
    #[arg(long)]
    pub decisions: PathBuf,
    /// Agent whose decisions are executed. Defaults to `__consensus__` when
    /// present, otherwise the only agent in the log.
    #[arg(long)]
    pub agent: Option<String>,
    /// Sharpe convention: 1 (per period) or 252 (annualized from daily).
    #[arg(long, value_parser = parse_k)]
    pub k: SharpeConvention,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub run: RunInputs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub run: RunInputs,
    #[arg(long)]
    pub out: PathBuf,
    /// Calibration trials; without it trials are derived from decision confidences.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Counterfactual trials.
    #[arg(long)]
    pub counterfactual: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BINS, value_parser = parse_bins)]
    pub bins: usize,
    #[arg(long, default_value_t = 0.95, value_parser = parse_level)]
    pub level: f64,
}

#[derive(Debug, Args)]
pub struct SharpeArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub sr: f64,
    /// Number of return observations.
    #[arg(long = "t")]
    pub observations: usize,
    #[arg(long, value_parser = parse_k)]
    pub k: SharpeConvention,
    #[arg(long, default_value_t = 0.95, value_parser = parse_level)]
    pub level: f64,
    /// Also write the half-width surface (`sr,T,half_width`) to this CSV.
    #[arg(long)]
    pub grid: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Calibration trials file.
    #[arg(long, conflicts_with_all = ["decisions", "prices"])]
    pub trials: Option<PathBuf>,
    /// Derive trials from decision confidences and next-bar returns.
    #[arg(long, requires = "prices")]
    pub decisions: Option<PathBuf>,
    #[arg(long, requires = "decisions")]
    pub prices: Option<PathBuf>,
    #[arg(long)]
    pub agent: Option<String>,
    /// Manifest supplying the cutoff for the out-of-sample check.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BINS, value_parser = parse_bins)]
    pub bins: usize,
    /// Write the result as JSON to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CounterfactualArgs {
    #[arg(long)]
    pub trials: PathBuf,
    /// Manifest declaring the rho grid.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DisaggregateArgs {
    #[command(flatten)]
    pub run: RunInputs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    /// TOML file with one `[[system]]` table (`name`, `modeled`) per system.
    #[arg(long)]
    pub systems: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
