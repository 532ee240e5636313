//! Command-line front end over the estimation library: CSV ingestion with
//! factor expansion, the three subcommands (`regress`, `simulate`,
//! `diagnose`), and table/CSV/JSON rendering.
//!
//! Exit codes: 0 success (estimator infeasibility is *reported*, not fatal),
//! 2 usage, 3 data problem, 4 numerical failure.

pub mod args;
pub mod commands;
pub mod config_file;
pub mod ingest;
pub mod render;

use manycov::Error;

/// A command failed; carries the message and the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, bad config file, invalid spec (exit 2).
    Usage(String),
    /// Unreadable/ill-formed input data (exit 3).
    Data(String),
    /// The computation itself broke down (exit 4).
    Numerical(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numerical(m) => m,
        }
    }
}

/// Classify a library error escaping a fit/simulation: sizing problems are
/// data errors (the data didn't fit the declared cap), everything else that
/// reaches this point is a numerical failure.
pub fn numerical(e: Error) -> Failure {
    match e {
        Error::DesignTooLarge { .. } => Failure::Data(e.to_string()),
        _ => Failure::Numerical(e.to_string()),
    }
}

/// Dispatch a parsed command line. Output goes to stdout or `--out`.
pub fn run(cli: args::Cli) -> Result<(), Failure> {
    match cli.command {
        args::Command::Regress(a) => commands::regress(a),
        args::Command::Simulate(a) => commands::simulate(a),
        args::Command::Diagnose(a) => commands::diagnose(a),
    }
}
