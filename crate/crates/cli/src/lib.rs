//! Command-line front end for `epi-core`.
//!
//! Exit codes: 0 holds / consistent / violation found by search, 1 search
//! found nothing or reproduction mismatched, 2 input error, 3 violated,
//! 4 suspicious Monte-Carlo result.

pub mod cli;
pub mod commands;
pub mod error;
pub mod files;
pub mod report;
pub mod status;

use cli::{Cli, Command};
use commands::{McOptions, Outcome, SearchOptions};
pub use error::CliError;
pub use status::Status;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Human,
    Json,
    Csv,
}

/// Runs a parsed command line. Returns the outcome and the format to print.
pub fn run(cli: &Cli) -> Result<(Outcome, Format), CliError> {
    let tol = cli.tol;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::Usage(format!(
            "tol must be positive and finite, got {tol}"
        )));
    }
    if cli.threads == Some(0) {
        return Err(CliError::Usage("threads must be at least 1".to_string()));
    }
    let json = |j: bool| if j { Format::Json } else { Format::Human };
    Ok(match &cli.command {
        Command::Reproduce { json: j } => (commands::reproduce(tol)?, json(*j)),
        Command::Check { path, json: j, csv } => {
            let f = if *csv { Format::Csv } else { json(*j) };
            (commands::check(path, tol)?, f)
        }
        Command::GammaPath {
            path,
            gammas,
            json: j,
        } => (commands::gamma(path, gammas, tol)?, json(*j)),
        Command::Search(args) => {
            let opts = SearchOptions {
                config: args.config()?,
                out: args.out.clone(),
                threads: cli.threads,
            };
            (commands::search(&opts, tol)?, json(args.json))
        }
        Command::Mc(args) => {
            let opts = McOptions {
                mixture: args.mixture.clone(),
                sigma_z: args.sigma_z.clone(),
                a: args.a.clone(),
                m: args.m,
                k: args.k,
                seed: args.seed,
            };
            (commands::mc(&opts, tol)?, json(args.json))
        }
    })
}
