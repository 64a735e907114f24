use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use segdetect::{AnnealSettings, DetectorConfig, LassoOptions};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "segdetect", version, about = "Multiple change point detection in high-dimensional regression")]
pub struct Cli {
    /// Master seed; every output is a deterministic function of it.
    #[arg(long, global = true, env = "SEGDETECT_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (default: all hardware threads).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect change points in a dataset CSV and write the fit as JSON.
    Detect(DetectArgs),
    /// Refit segment coefficients for given change points.
    Refit(RefitArgs),
    /// Simulate a dataset from the benchmark data-generating process.
    Simulate(SimulateArgs),
    /// Monte Carlo benchmark over a grid of simulation settings.
    Benchmark(BenchmarkArgs),
    /// Record the annealing chain for one penalty value as CSV.
    Trace(TraceArgs),
}

/// Detector settings shared by every command that runs the pipeline.
#[derive(Debug, Clone, Default, Args)]
pub struct DetectorFlags {
    /// TOML file with detector settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of initial boundaries.
    #[arg(long)]
    pub n_check: Option<usize>,
    /// Comma-separated penalty grid for BIC selection.
    #[arg(long)]
    pub mu_grid: Option<String>,
    /// Cross-validation folds for the Lasso fits.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Constant of the BIC penalty term [default: 10].
    #[arg(long)]
    pub bic_c: Option<f64>,
    /// Annealing iterations [default: 10000].
    #[arg(long)]
    pub sa_iters: Option<usize>,
    /// Temperature scale [default: 1.25].
    #[arg(long)]
    pub sa_temp: Option<f64>,
    /// Proposal half-width [default: round(n/20)].
    #[arg(long)]
    pub sa_jump: Option<usize>,
    /// Comma-separated sine oscillation counts per component [default: 250+25*(j-1)].
    #[arg(long)]
    pub periods: Option<String>,
    /// Points in each Lasso cross-validation grid [default: 20].
    #[arg(long)]
    pub lambda_grid_size: Option<usize>,
    /// Penalize coefficients relative to their column scale.
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub detector: DetectorFlags,
}

#[derive(Debug, Args)]
pub struct RefitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Comma-separated change points on the quantile scale (k/n); empty for none.
    #[arg(long, default_value = "")]
    pub tau: String,
    #[command(flatten)]
    pub detector: DetectorFlags,
}

#[derive(Debug, Clone, Args)]
pub struct SimFlags {
    /// Design correlation.
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Shuffle rows after generation.
    #[arg(long)]
    pub shuffle_rows: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    /// True number of change points.
    #[arg(long = "n-changes", default_value_t = 0)]
    pub n_changes: usize,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub sim: SimFlags,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Comma-separated sample sizes.
    #[arg(long, default_value = "250")]
    pub n: String,
    /// Comma-separated dimensions.
    #[arg(long, default_value = "50")]
    pub p: String,
    /// Comma-separated true change point counts.
    #[arg(long = "n-changes", default_value = "1")]
    pub n_changes: String,
    /// Run the full benchmark grid (n in 250..625, N up to n/125-1) for each p.
    #[arg(long)]
    pub full_grid: bool,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub sim: SimFlags,
    #[command(flatten)]
    pub detector: DetectorFlags,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Penalty value.
    #[arg(long)]
    pub mu: f64,
    /// Comma-separated initial gaps (default: equally spaced partition).
    #[arg(long)]
    pub init: Option<String>,
    #[command(flatten)]
    pub detector: DetectorFlags,
}

/// Settings accepted in a `--config` TOML file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n_check: Option<usize>,
    pub mu_grid: Option<Vec<f64>>,
    pub folds: Option<usize>,
    pub bic_c: Option<f64>,
    pub sa_iters: Option<usize>,
    pub sa_temp: Option<f64>,
    pub sa_jump: Option<usize>,
    pub periods: Option<Vec<f64>>,
    pub lambda_grid_size: Option<usize>,
    pub standardize: Option<bool>,
    pub lasso_tol: Option<f64>,
    pub lasso_max_iter: Option<usize>,
}

pub fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::Config(format!("{what}: cannot parse '{s}'")))
        })
        .collect()
}

impl DetectorFlags {
    fn load_file(&self) -> CliResult<ConfigFile> {
        match &self.config {
            None => Ok(ConfigFile::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read config {}: {e}", path.display()))
                })?;
                toml::from_str(&text).map_err(|e| {
                    CliError::Config(format!("invalid config {}: {e}", path.display()))
                })
            }
        }
    }

    /// `Ň` when set by a flag or the config file.
    pub fn n_check_override(&self) -> CliResult<Option<usize>> {
        Ok(self.n_check.or(self.load_file()?.n_check))
    }

    /// Flags override the config file, which overrides the defaults.
    /// `default_n_check` applies when neither source sets it.
    pub fn resolve(&self, default_n_check: usize) -> CliResult<DetectorConfig> {
        let file = self.load_file()?;
        let mut config = DetectorConfig::new(self.n_check.or(file.n_check).unwrap_or(default_n_check));
        if let Some(grid) = &self.mu_grid {
            config.mu_grid = parse_list(grid, "--mu-grid")?;
        } else if let Some(grid) = file.mu_grid {
            config.mu_grid = grid;
        }
        if let Some(v) = self.folds.or(file.folds) {
            config.cv_folds = v;
        }
        if let Some(v) = self.bic_c.or(file.bic_c) {
            config.bic_c = v;
        }
        if let Some(v) = self.lambda_grid_size.or(file.lambda_grid_size) {
            config.lambda_grid_size = v;
        }
        let defaults = AnnealSettings::default();
        config.anneal = AnnealSettings {
            iterations: self.sa_iters.or(file.sa_iters).unwrap_or(defaults.iterations),
            temp: self.sa_temp.or(file.sa_temp).unwrap_or(defaults.temp),
            max_jump: self.sa_jump.or(file.sa_jump),
            periods: match &self.periods {
                Some(p) => Some(parse_list(p, "--periods")?),
                None => file.periods,
            },
        };
        let lasso = LassoOptions::default();
        config.lasso = LassoOptions {
            tol: file.lasso_tol.unwrap_or(lasso.tol),
            max_iter: file.lasso_max_iter.unwrap_or(lasso.max_iter),
            standardize: self.standardize || file.standardize.unwrap_or(false),
        };
        config.validate()?;
        Ok(config)
    }
}
