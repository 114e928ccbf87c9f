use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use epi_core::mc::DEFAULT_K;
use epi_core::search::{Encoding, SearchConfig};
use epi_core::DEFAULT_TOL;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "epicheck",
    version,
    about = "Check the matrix-weighted entropy power inequality"
)]
pub struct Cli {
    /// Relative tolerance for every matrix predicate and violation flag.
    #[arg(long, global = true, env = "EPICHECK_TOL", default_value_t = DEFAULT_TOL)]
    pub tol: f64,

    /// Worker threads for parallel search restarts.
    #[arg(long, global = true, env = "EPICHECK_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the built-in counterexample and compare with published values.
    Reproduce {
        #[arg(long)]
        json: bool,
    },
    /// Evaluate both sides of the inequality for an instance file.
    Check {
        path: PathBuf,
        #[arg(long, conflicts_with = "csv")]
        json: bool,
        #[arg(long)]
        csv: bool,
    },
    /// AM-GM diagnostic along the perturbation path.
    GammaPath {
        path: PathBuf,
        /// `start:stop:step` or a comma-separated list, all in [0, 1).
        #[arg(long, default_value = "0:0.95:0.05")]
        gammas: String,
        #[arg(long)]
        json: bool,
    },
    /// Random-restart search for violating instances.
    Search(SearchArgs),
    /// Monte-Carlo check of the commuting case for a Gaussian mixture.
    Mc(McArgs),
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Restrict to diagonal A and Sigma_Z.
    #[arg(long)]
    pub commuting_only: bool,
    /// Where to write the best instance when a violation is found.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub step_scale: f64,
    /// Eigenvalue range `lo:hi` for the initial covariance draws.
    #[arg(long, default_value = "1e-2:1e3")]
    pub eig_range: String,
    #[arg(long)]
    pub json: bool,
}

impl SearchArgs {
    pub fn config(&self) -> Result<SearchConfig, CliError> {
        let range = parse_range(&self.eig_range)?;
        let mut cfg = SearchConfig::new(self.n);
        cfg.restarts = self.restarts;
        cfg.iterations = self.iters;
        cfg.seed = self.seed;
        cfg.step_scale = self.step_scale;
        cfg.eig_range = range;
        cfg.encoding = if self.commuting_only {
            Encoding::Commuting
        } else {
            Encoding::General
        };
        Ok(cfg)
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Usage(format!("eig-range: expected lo:hi, got `{s}`"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    Ok((
        lo.trim().parse().map_err(|_| bad())?,
        hi.trim().parse().map_err(|_| bad())?,
    ))
}

#[derive(Debug, Args)]
pub struct McArgs {
    /// Mixture file `{components: [{weight, mean, cov}]}`.
    #[arg(long)]
    pub mixture: PathBuf,
    /// Matrix file holding Sigma_Z.
    #[arg(long)]
    pub sigma_z: PathBuf,
    /// Matrix file holding A.
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    pub m: usize,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
}
