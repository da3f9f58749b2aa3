//! Command-line front end: theory reports, Monte Carlo experiments,
//! regime sweeps, covariate-inflation experiments, and named-scenario
//! reproductions, all emitting plot-ready CSV/JSON plus a run manifest.

pub mod commands;
pub mod config;
pub mod output;

use clap::{Args, Parser, Subcommand};
use ipsw_core::estimators::EstimatorTag;
use std::path::PathBuf;

/// Errors carry the exit-code contract: 1 for I/O, 2 for validation/usage.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
}

impl CliError {
    pub fn io(msg: impl Into<String>) -> Self {
        CliError::Io(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ipsw",
    version,
    about = "Generalize randomized-trial treatment effects to a target population: \
             exact finite-sample theory and Monte Carlo experiments for the IPSW estimator family"
)]
pub struct Cli {
    /// Worker threads for Monte Carlo replicates (default: IPSW_WORKERS or
    /// all cores). Results do not depend on this.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate closed-form bias, exact variance, bounds, and asymptotic
    /// variance for IPSW variants at one (n, m).
    Theory(TheoryArgs),
    /// Run a seeded Monte Carlo comparison of estimators.
    Simulate(SimulateArgs),
    /// Sweep the trial size under a fixed-m or fixed-ratio regime and
    /// compare scaled variances to their asymptotes.
    Sweep(SweepArgs),
    /// Measure the variance inflation from adding a shifted, independent,
    /// non-modifier covariate to the adjustment set.
    Inflation(InflationArgs),
    /// Materialize a named scenario and run a subcommand on it.
    Scenario(ScenarioArgs),
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    /// Config document (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Trial sample size.
    #[arg(long)]
    pub n: u64,
    /// Target sample size, or "inf" for the semi-oracle regime.
    #[arg(long)]
    pub m: String,
    /// Comma-separated estimators (ipsw_oracle, ipsw_semi, ipsw_est,
    /// ipsw_semi_pihat, ipsw_est_pihat; short aliases accepted).
    #[arg(long = "est", value_delimiter = ',', required = true)]
    pub estimators: Vec<String>,
    /// Output JSON path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct McArgs {
    /// Trial sample size.
    #[arg(long)]
    pub n: u64,
    /// Target sample size.
    #[arg(long)]
    pub m: u64,
    /// Monte Carlo replicates.
    #[arg(long)]
    pub reps: u64,
    /// RNG seed.
    #[arg(long)]
    pub seed: u64,
    /// Comma-separated estimators.
    #[arg(
        long = "est",
        value_delimiter = ',',
        default_values_t = ["ht".to_string(), "dm".to_string(), "ipsw_est".to_string(), "ipsw_est_pihat".to_string()]
    )]
    pub estimators: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub mc: McArgs,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct SweepCoreArgs {
    /// Comma-separated trial sizes.
    #[arg(long = "n-grid", value_delimiter = ',', required = true)]
    pub n_grid: Vec<u64>,
    /// Hold m fixed along the grid.
    #[arg(long = "fixed-m", conflicts_with = "ratio")]
    pub fixed_m: Option<u64>,
    /// m = ratio × n along the grid; "inf" selects the semi-oracle regime.
    #[arg(long)]
    pub ratio: Option<String>,
    #[arg(long)]
    pub reps: u64,
    #[arg(long)]
    pub seed: u64,
    /// Comma-separated IPSW estimators to sweep.
    #[arg(
        long = "est",
        value_delimiter = ',',
        default_values_t = ["ipsw_est".to_string(), "ipsw_est_pihat".to_string()]
    )]
    pub estimators: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub core: SweepCoreArgs,
    /// Output CSV path; a JSON sidecar with raw variances is written next
    /// to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct InflationCoreArgs {
    /// Comma-separated shift levels s; the target aux distribution is
    /// (q0 + s, 1 − q0 − s).
    #[arg(long = "shifts", value_delimiter = ',', required = true)]
    pub shifts: Vec<f64>,
    /// Trial probability of the first aux level (0.5 = balanced,
    /// 0.25 = imbalanced).
    #[arg(long = "trial-q0", default_value_t = 0.5)]
    pub trial_q0: f64,
    #[arg(long)]
    pub n: u64,
    /// Target sample size per replicate.
    #[arg(long)]
    pub m: u64,
    #[arg(long)]
    pub reps: u64,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct InflationArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub core: InflationCoreArgs,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario name: toy, toy-extended, or semi-synthetic.
    pub name: String,

    /// toy-extended: auxiliary covariate mode, "shifted" or "modifier".
    #[arg(long, default_value = "shifted")]
    pub mode: String,
    /// toy-extended (shifted): balanced trial aux distribution q_R = (0.5, 0.5).
    #[arg(long, conflicts_with = "imbalanced")]
    pub balanced: bool,
    /// toy-extended (shifted): imbalanced trial aux distribution q_R = (0.25, 0.75).
    #[arg(long)]
    pub imbalanced: bool,
    /// toy-extended: target aux distribution (comma-separated).
    #[arg(long = "q-t", value_delimiter = ',')]
    pub q_t: Option<Vec<f64>>,
    /// toy-extended (modifier): aux distribution shared by both populations.
    #[arg(long = "q", value_delimiter = ',')]
    pub q: Option<Vec<f64>>,
    /// toy-extended (modifier): per-level treatment-effect shift.
    #[arg(long = "tau-shift", value_delimiter = ',', allow_hyphen_values = true)]
    pub tau_shift: Option<Vec<f64>>,

    /// semi-synthetic: include the synthetic non-shifted effect modifier
    /// x_sup in the generative model.
    #[arg(long = "with-x-sup")]
    pub with_x_sup: bool,
    /// semi-synthetic: adjustment set for the estimators — "minimal"
    /// (time_to_treatment, blood_pressure), "minimal+glasgow",
    /// "minimal+x_sup", or "full".
    #[arg(long)]
    pub adjust: Option<String>,

    /// Output directory; receives the materialized config, the subcommand's
    /// outputs, and a manifest.
    #[arg(long)]
    pub out: PathBuf,

    #[command(subcommand)]
    pub action: ScenarioAction,
}

#[derive(Debug, Subcommand)]
pub enum ScenarioAction {
    /// Monte Carlo comparison on the materialized scenario.
    Simulate(McArgs),
    /// Regime sweep on the materialized scenario.
    Sweep(SweepCoreArgs),
    /// Covariate-inflation experiment on the materialized scenario.
    Inflation(InflationCoreArgs),
}

/// Parses one estimator name; canonical names and short aliases.
pub fn parse_estimator(name: &str) -> Result<EstimatorTag, CliError> {
    let tag = match name {
        "oracle" => Some(EstimatorTag::IpswOracle),
        "semi_oracle" | "semi" => Some(EstimatorTag::IpswSemi),
        "estimated" => Some(EstimatorTag::IpswEst),
        "semi_oracle_pihat" => Some(EstimatorTag::IpswSemiPihat),
        "estimated_pihat" => Some(EstimatorTag::IpswEstPihat),
        other => EstimatorTag::from_name(other),
    };
    tag.ok_or_else(|| {
        let valid: Vec<&str> = EstimatorTag::ALL.iter().map(|t| t.name()).collect();
        CliError::validation(format!("unknown estimator {name:?}; valid: {}", valid.join(", ")))
    })
}

pub fn parse_estimators(names: &[String]) -> Result<Vec<EstimatorTag>, CliError> {
    names.iter().map(|n| parse_estimator(n)).collect()
}

/// Entry point shared by the binary and the integration tests.
pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(workers) = cli.workers.or_else(|| {
        std::env::var("IPSW_WORKERS").ok().and_then(|v| v.parse().ok())
    }) {
        if workers == 0 {
            return Err(CliError::validation("--workers must be >= 1"));
        }
        // ignore the error if a pool already exists (tests call run() twice)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
    match cli.command {
        Command::Theory(args) => commands::run_theory(&args),
        Command::Simulate(args) => commands::run_simulate(&args),
        Command::Sweep(args) => commands::run_sweep(&args),
        Command::Inflation(args) => commands::run_inflation(&args),
        Command::Scenario(args) => commands::run_scenario(&args),
    }
}
