//! Run configuration: a JSON file, overridden field by field from the
//! command line, then resolved into concrete values.

use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use mrp::catalog::{format_date, parse_date, StateSpace};
use mrp::forecast::{standard_horizons, FitSettings};
use mrp::prior::{DEFAULT_DIRICHLET_FLOOR, DEFAULT_Q};
use mrp::sampler::GibbsConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Output directory used when neither the flag, the config file nor the
/// environment names one.
pub const DEFAULT_OUTPUT_DIR: &str = "mrp-output";
/// Environment variable holding the default output directory.
pub const OUTPUT_DIR_ENV: &str = "MRP_OUTPUT_DIR";

/// Configuration as written in the JSON file. Every field is optional in the
/// file; `seed` must be supplied by the file or the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub catalog: Option<PathBuf>,
    /// Lower magnitude bound of each class, increasing.
    pub thresholds: Vec<f64>,
    /// Observation horizon; defaults to the last event.
    pub end: Option<String>,
    pub min_count: usize,
    pub q_target: f64,
    pub dirichlet_floor: f64,
    pub gibbs: GibbsConfig,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Credible level of every interval.
    pub level: f64,
    /// Two-sided Bayesian p-value below which an observation is flagged.
    pub outlier_threshold: f64,
    /// Forecast horizons in days; defaults to 1-6 months and 1-4 years.
    pub horizons_days: Option<Vec<f64>>,
    /// Elapsed time for the forecast; defaults to the censored tail.
    pub elapsed_days: Option<f64>,
    /// End dates of the backtest.
    pub backtest_ends: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            catalog: None,
            thresholds: Vec::new(),
            end: None,
            min_count: FitSettings::default().min_count,
            q_target: DEFAULT_Q,
            dirichlet_floor: DEFAULT_DIRICHLET_FLOOR,
            gibbs: GibbsConfig::default(),
            seed: None,
            output_dir: None,
            level: 0.95,
            outlier_threshold: mrp::summaries::OUTLIER_THRESHOLD,
            horizons_days: None,
            elapsed_days: None,
            backtest_ends: Vec::new(),
        }
    }
}

/// Command-line values that replace the file's, when given.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub catalog: Option<PathBuf>,
    pub thresholds: Option<Vec<f64>>,
    pub end: Option<String>,
    pub min_count: Option<usize>,
    pub q_target: Option<f64>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub n_iter: Option<usize>,
    pub n_burnin: Option<usize>,
    pub thin: Option<usize>,
    pub n_chains: Option<usize>,
    pub level: Option<f64>,
    pub backtest_ends: Option<Vec<String>>,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// The file's configuration, or the defaults when no file is given.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::from_path)
    }

    pub fn apply(mut self, o: &Overrides) -> Self {
        fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
            if let Some(v) = src {
                *dst = v.clone();
            }
        }
        if o.catalog.is_some() {
            self.catalog.clone_from(&o.catalog);
        }
        if o.end.is_some() {
            self.end.clone_from(&o.end);
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.output_dir.is_some() {
            self.output_dir.clone_from(&o.output_dir);
        }
        set(&mut self.thresholds, &o.thresholds);
        set(&mut self.min_count, &o.min_count);
        set(&mut self.q_target, &o.q_target);
        set(&mut self.gibbs.n_iter, &o.n_iter);
        set(&mut self.gibbs.n_burnin, &o.n_burnin);
        set(&mut self.gibbs.thin, &o.thin);
        set(&mut self.gibbs.n_chains, &o.n_chains);
        set(&mut self.level, &o.level);
        set(&mut self.backtest_ends, &o.backtest_ends);
        self
    }

    /// Checks the configuration and fills in every default. `env_output`
    /// is the value of [`OUTPUT_DIR_ENV`], if set.
    pub fn resolve(&self, env_output: Option<&str>) -> Result<Resolved, CliError> {
        let seed = self.seed.ok_or(CliError::MissingSeed)?;
        let space = StateSpace::new(self.thresholds.clone())?;
        let end = self.end.as_deref().map(parse_date).transpose()?;
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CliError::Config(format!(
                "level must lie in (0, 1), got {}",
                self.level
            )));
        }
        if !(self.outlier_threshold > 0.0 && self.outlier_threshold < 0.5) {
            return Err(CliError::Config(format!(
                "outlier_threshold must lie in (0, 0.5), got {}",
                self.outlier_threshold
            )));
        }
        let horizons = self.horizons_days.clone().unwrap_or_else(standard_horizons);
        if horizons.is_empty() || horizons.iter().any(|h| !(*h >= 0.0)) {
            return Err(CliError::Config(
                "horizons_days must be non-negative and non-empty".into(),
            ));
        }
        if let Some(e) = self.elapsed_days {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(CliError::Config(format!("elapsed_days must be non-negative, got {e}")));
            }
        }
        let backtest_ends = self
            .backtest_ends
            .iter()
            .map(|s| parse_date(s))
            .collect::<mrp::Result<Vec<_>>>()?;
        let mut gibbs = self.gibbs.clone();
        gibbs.seed = seed;
        gibbs.validate()?;
        let output_dir = self
            .output_dir
            .clone()
            .or_else(|| env_output.filter(|s| !s.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
        Ok(Resolved {
            catalog: self.catalog.clone(),
            space,
            end,
            settings: FitSettings {
                q_target: self.q_target,
                dirichlet_floor: self.dirichlet_floor,
                min_count: self.min_count,
                gibbs,
            },
            seed,
            output_dir,
            level: self.level,
            outlier_threshold: self.outlier_threshold,
            horizons,
            elapsed_days: self.elapsed_days,
            backtest_ends,
        })
    }
}

/// Fully specified run.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub catalog: Option<PathBuf>,
    pub space: StateSpace,
    pub end: Option<NaiveDateTime>,
    pub settings: FitSettings,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub level: f64,
    pub outlier_threshold: f64,
    pub horizons: Vec<f64>,
    pub elapsed_days: Option<f64>,
    pub backtest_ends: Vec<NaiveDateTime>,
}

impl Resolved {
    pub fn catalog_path(&self) -> Result<&Path, CliError> {
        self.catalog
            .as_deref()
            .ok_or_else(|| CliError::Config("no catalog given (set \"catalog\" or pass --catalog)".into()))
    }

    /// The configuration that reproduces this run, without the output
    /// directory so that reruns elsewhere compare equal.
    pub fn to_config(&self) -> RunConfig {
        RunConfig {
            catalog: self.catalog.clone(),
            thresholds: self.space.thresholds().to_vec(),
            end: self.end.as_ref().map(format_date),
            min_count: self.settings.min_count,
            q_target: self.settings.q_target,
            dirichlet_floor: self.settings.dirichlet_floor,
            gibbs: self.settings.gibbs.clone(),
            seed: Some(self.seed),
            output_dir: None,
            level: self.level,
            outlier_threshold: self.outlier_threshold,
            horizons_days: Some(self.horizons.clone()),
            elapsed_days: self.elapsed_days,
            backtest_ends: self.backtest_ends.iter().map(format_date).collect(),
        }
    }
}
