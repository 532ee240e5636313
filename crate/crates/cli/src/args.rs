//! Flag definitions. Every value is optional at the clap level so a
//! `--config` file can supply it; explicit flags always win. Defaults are
//! applied after the merge in [`crate::config_file`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "manycov",
    version,
    about = "Heteroskedasticity-robust OLS inference with many nuisance covariates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a partialled regression on a CSV file and report every requested
    /// variance estimator with its confidence interval.
    Regress(RegressArgs),
    /// Run a seeded Monte Carlo study and report coverage/length per
    /// estimator and interval method.
    Simulate(SimulateArgs),
    /// Inspect a design: pruning, leverage distribution, feasibility.
    Diagnose(DiagnoseArgs),
}

/// Flags shared by the CSV-consuming subcommands.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// CSV file (RFC 4180, header row required, UTF-8)
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Outcome column
    #[arg(long)]
    pub y: Option<String>,

    /// Regressor-of-interest column (repeat or comma-separate for several)
    #[arg(long, value_delimiter = ',')]
    pub x: Vec<String>,

    /// Numeric nuisance covariate column
    #[arg(long, value_delimiter = ',')]
    pub w: Vec<String>,

    /// Categorical column expanded to dummies (first observed level dropped)
    #[arg(long, value_delimiter = ',')]
    pub factor: Vec<String>,

    /// Interaction of categorical columns, e.g. "county:cohort"
    #[arg(long, value_delimiter = ',')]
    pub interact: Vec<String>,

    /// Refuse designs with more rows than this (dense n×n work matrix)
    #[arg(long)]
    pub memory_cap: Option<usize>,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Output format: text, csv, or json
    #[arg(long)]
    pub format: Option<String>,

    /// Write the report here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Size of the worker thread pool (default: one per CPU)
    #[arg(long)]
    pub threads: Option<usize>,

    /// Flat key=value file mirroring the flags; explicit flags win
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Comma-separated estimators (default: all of ho0,ho1,hc0..hc4,hck)
    #[arg(long, value_delimiter = ',')]
    pub estimators: Vec<String>,

    /// Confidence level in (0,1)
    #[arg(long)]
    pub level: Option<f64>,

    /// Use a percentile-t bootstrap with this many resamples for the CIs
    #[arg(long)]
    pub bootstrap_b: Option<usize>,

    /// Seed for the bootstrap resampler
    #[arg(long)]
    pub seed: Option<u64>,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Data-generating process: model1, panel, or plm
    #[arg(long)]
    pub model: Option<String>,

    /// Sample size (model1, plm)
    #[arg(long)]
    pub n: Option<usize>,

    /// Number of nuisance dummy columns (model1)
    #[arg(long)]
    pub k: Option<usize>,

    /// Number of cross-sectional units (panel)
    #[arg(long)]
    pub units: Option<usize>,

    /// Periods per unit (panel)
    #[arg(long)]
    pub periods: Option<usize>,

    /// Dimension of the smooth-part covariate (plm)
    #[arg(long)]
    pub dim_z: Option<usize>,

    /// Total degree of the polynomial sieve basis (plm)
    #[arg(long)]
    pub degree: Option<usize>,

    /// Smooth confounder shape (plm): exp-mean, sin-pi-mean, quadratic-mean
    #[arg(long)]
    pub g: Option<String>,

    /// True coefficient on x
    #[arg(long)]
    pub beta: Option<f64>,

    /// Heteroskedastic errors (model1, panel)
    #[arg(long)]
    pub hetero: bool,

    /// Draw the design once and hold it fixed across replications
    #[arg(long)]
    pub fixed_design: bool,

    /// Number of Monte Carlo replications
    #[arg(long = "s", visible_alias = "reps")]
    pub s: Option<usize>,

    /// Run seed; replications derive independent streams from it
    #[arg(long)]
    pub seed: Option<u64>,

    /// Comma-separated estimators (default: ho1,hck)
    #[arg(long, value_delimiter = ',')]
    pub estimators: Vec<String>,

    /// Interval methods: gaussian and/or bootstrap (default: gaussian)
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,

    /// Confidence level in (0,1)
    #[arg(long)]
    pub level: Option<f64>,

    /// Bootstrap resamples per replication (when methods include bootstrap)
    #[arg(long)]
    pub bootstrap_b: Option<usize>,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub common: CommonArgs,
}
