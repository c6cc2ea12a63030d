//! Command-line definitions.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "ldpopt",
    version,
    about = "Optimal discrete distribution estimation under local differential privacy"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a mechanism, verify its privacy level and print it as JSON.
    #[command(args_override_self = true)]
    Mech(MechArgs),
    /// Tabulate closed-form risks over a (k, eps, d, n) grid.
    #[command(args_override_self = true)]
    RiskTable(RiskTableArgs),
    /// Lower-bound quantities (Φ, δ, trace functional, two-point bound) for one mechanism.
    #[command(args_override_self = true)]
    LowerBound(LowerBoundArgs),
    /// Monte Carlo simulation of an estimator, one row per trial.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Grid-posterior Bayes loss near the uniform distribution (k = 2 or 3).
    #[command(args_override_self = true)]
    BayesDemo(BayesDemoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Subset,
    Krr,
    Rappor,
}

/// Subset size: a fixed value or `auto` for the risk-optimal `d*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DChoice {
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for DChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(DChoice::Auto);
        }
        s.parse()
            .map(DChoice::Fixed)
            .map_err(|_| format!("expected a positive integer or \"auto\", got {s:?}"))
    }
}

/// Privacy level: a decimal number, or `ln<x>` / `ln(<x>)` for `log(x)`.
pub fn parse_eps(s: &str) -> Result<f64, String> {
    let v = match s.strip_prefix("ln") {
        Some(rest) => {
            let inner = rest.trim_start_matches('(').trim_end_matches(')');
            let x: f64 = inner
                .parse()
                .map_err(|_| format!("invalid epsilon {s:?}"))?;
            x.ln()
        }
        None => s.parse().map_err(|_| format!("invalid epsilon {s:?}"))?,
    };
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("epsilon must be finite and >= 0, got {s:?}"))
    }
}

/// Flags shared by every command.
#[derive(Debug, Args)]
pub struct Common {
    /// Base seed of the per-trial random streams.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for Monte Carlo loops (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// File of `key = value` lines; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// How to obtain a mechanism: a built-in construction or a JSON file.
#[derive(Debug, Args)]
pub struct MechSource {
    #[arg(long, value_enum, default_value = "subset")]
    pub kind: Kind,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_parser = parse_eps)]
    pub eps: Option<f64>,
    /// Subset size or `auto`.
    #[arg(long, default_value = "auto")]
    pub d: DChoice,
    /// Mechanism JSON (as written by `mech`); overrides --kind/--k/--eps/--d.
    #[arg(long)]
    pub mechanism_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MechArgs {
    #[command(flatten)]
    pub source: MechSource,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RiskTableArgs {
    /// Alphabet sizes: comma-separated values or inclusive ranges `a..b`.
    #[arg(long)]
    pub k: String,
    /// Privacy levels, comma-separated.
    #[arg(long)]
    pub eps: String,
    /// Subset sizes (values, ranges or `auto`).
    #[arg(long, default_value = "auto")]
    pub d: String,
    /// Sample sizes.
    #[arg(long, default_value = "1")]
    pub n: String,
    /// `uniform` or `file:<path>` with a JSON array of probabilities.
    #[arg(long, default_value = "uniform")]
    pub p: String,
    /// Attach Monte Carlo columns.
    #[arg(long)]
    pub mc: bool,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct LowerBoundArgs {
    #[command(flatten)]
    pub source: MechSource,
    #[arg(long, default_value_t = 1)]
    pub n: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: MechSource,
    #[arg(long)]
    pub n: u64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value = "uniform")]
    pub p: String,
    /// `subset` (empirical) or `least_squares`; default depends on the mechanism.
    #[arg(long)]
    pub estimator: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct BayesDemoArgs {
    #[command(flatten)]
    pub source: MechSource,
    #[arg(long, default_value_t = 5000)]
    pub n: u64,
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    /// Prior radius (default n^(-5/13)).
    #[arg(long)]
    pub radius: Option<f64>,
    /// Grid points per axis.
    #[arg(long, default_value_t = 256)]
    pub resolution: usize,
    #[command(flatten)]
    pub common: Common,
}
