//! Pipeline stages. Each one reads its inputs from the output directory
//! and writes its artifacts back there, so any stage can be re-run alone.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use mrp::catalog::{
    add_days, build_sequence_until, format_date, split_catalog, sufficient_stats, EventCatalog, SequenceData,
    StateSpace,
};
use mrp::forecast::{
    backtest, csp_posterior, csp_ratios, ratio_rows, write_backtest_wide, write_csp_wide, write_rows_csv, RatioKind,
};
use mrp::prior::{elicit_priors, PriorSet, QuantileRepair};
use mrp::sampler::{run_gibbs, ChainMeta, ChainOutput};
use mrp::simulate::{generate_mrp, sequence_to_catalog, TrueModel};
use mrp::summaries::{bayes_p_values, chain_summary, predictive_draws};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Resolved, RunConfig};
use crate::error::{CliError, StageFailure};

pub const SEQUENCE: &str = "sequence.json";
pub const SPLIT: &str = "split.json";
pub const PRIORS: &str = "priors.json";
pub const CHAINS: &str = "chains.jsonl";
pub const CHAINS_META: &str = "chains_meta.json";
pub const SUMMARY: &str = "summary.csv";
pub const PREDICTIVE: &str = "predictive.csv";
pub const PREDICTIVE_TRANSITIONS: &str = "predictive_transitions.csv";
pub const CSP: &str = "csp.csv";
pub const CSP_BANDS: &str = "csp_bands.csv";
pub const CSP_RATIOS: &str = "csp_ratios.csv";
pub const BACKTEST: &str = "backtest.csv";
pub const MANIFEST: &str = "manifest.json";

/// Random stream for predictive draws; chains use streams `0..n_chains`.
const PREDICTIVE_STREAM: u64 = u64::MAX;

/// Historical and current samples with the cut between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    /// One-based catalog position of the last historical event.
    pub cut_event: usize,
    pub cut_date: String,
    pub end_date: String,
    pub historical: SequenceData,
    pub current: SequenceData,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String, CliError> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| CliError::io(path, e))?))
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    Ok((path, BufWriter::new(file)))
}

fn write_with(dir: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> mrp::Result<()>) -> Result<(), CliError> {
    let (path, mut w) = create(dir, name)?;
    f(&mut w)?;
    w.flush().map_err(|e| CliError::io(&path, e))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    write_with(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn open(dir: &Path, name: &str, stage: &'static str) -> Result<BufReader<File>, CliError> {
    let path = dir.join(name);
    match File::open(&path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(CliError::MissingArtifact { path, stage }),
        Err(e) => Err(CliError::io(&path, e)),
    }
}

fn read_json<T: DeserializeOwned>(dir: &Path, name: &str, stage: &'static str) -> Result<T, CliError> {
    serde_json::from_reader(open(dir, name, stage)?).map_err(|e| CliError::Core(e.into()))
}

pub fn load_catalog(path: &Path) -> Result<EventCatalog, CliError> {
    if !path.is_file() {
        return Err(CliError::CatalogNotFound(path.to_path_buf()));
    }
    Ok(EventCatalog::from_csv_path(path)?)
}

/// What the elicitation stage decided.
#[derive(Debug, Clone, PartialEq)]
pub struct Elicited {
    pub split: SplitFile,
    pub priors: PriorSet,
    pub events: usize,
}

/// Reads the catalog, cuts it at the horizon, splits off the historical
/// prefix and elicits the priors. Writes `sequence.json`, `split.json` and
/// `priors.json`.
pub fn elicit(r: &Resolved) -> Result<Elicited, CliError> {
    let catalog = load_catalog(r.catalog_path()?)?;
    let end = match r.end {
        Some(end) => end,
        None => catalog.last_time().ok_or(mrp::Error::EmptyCatalog)?,
    };
    let catalog = catalog.truncated(&end);
    let seq = build_sequence_until(&catalog, &r.space, &end)?;
    let split = split_catalog(&seq, r.settings.min_count)?;
    let historical = sufficient_stats(&split.historical);
    let priors = elicit_priors(&historical, r.settings.q_target, r.settings.dirichlet_floor)?;
    let file = SplitFile {
        cut_event: split.cut + 1,
        cut_date: format_date(&catalog.records()[split.cut].time),
        end_date: format_date(&end),
        historical: split.historical,
        current: split.current,
    };
    write_json(&r.output_dir, SEQUENCE, &seq)?;
    write_json(&r.output_dir, SPLIT, &file)?;
    write_json(&r.output_dir, PRIORS, &priors)?;
    Ok(Elicited {
        split: file,
        priors,
        events: catalog.len(),
    })
}

/// Runs the sampler on the current sample. Writes `chains.jsonl` and
/// `chains_meta.json`.
pub fn fit(r: &Resolved) -> Result<ChainOutput, CliError> {
    let priors: PriorSet = read_json(&r.output_dir, PRIORS, "elicit")?;
    priors.validate()?;
    let split: SplitFile = read_json(&r.output_dir, SPLIT, "elicit")?;
    let output = run_gibbs(&sufficient_stats(&split.current), &priors, &r.settings.gibbs)?;
    write_with(&r.output_dir, CHAINS, |w| output.write_jsonl(w))?;
    write_json(&r.output_dir, CHAINS_META, &output.meta)?;
    Ok(output)
}

pub fn load_chains(dir: &Path) -> Result<ChainOutput, CliError> {
    let meta: ChainMeta = read_json(dir, CHAINS_META, "fit")?;
    Ok(ChainOutput::read_jsonl(open(dir, CHAINS, "fit")?, meta)?)
}

/// Posterior summaries and predictive checks of the observed times. Writes
/// `summary.csv`, `predictive.csv` and `predictive_transitions.csv`.
pub fn summarize(r: &Resolved) -> Result<(), CliError> {
    let output = load_chains(&r.output_dir)?;
    let split: SplitFile = read_json(&r.output_dir, SPLIT, "elicit")?;
    let summary = chain_summary(&output, r.level)?;
    write_with(&r.output_dir, SUMMARY, |w| summary.write_csv(w))?;
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    rng.set_stream(PREDICTIVE_STREAM);
    let predictive = predictive_draws(&output, &mut rng);
    let observed = sufficient_stats(&split.current).times;
    let report = bayes_p_values(&observed, &predictive, r.level, r.outlier_threshold);
    write_with(&r.output_dir, PREDICTIVE, |w| report.write_observations_csv(w))?;
    write_with(&r.output_dir, PREDICTIVE_TRANSITIONS, |w| {
        report.write_transitions_csv(w)
    })?;
    Ok(())
}

/// Crossing-state probabilities from the last observed state, with the
/// elapsed time taken from the censored tail unless configured. Writes
/// `csp.csv` (posterior means, one column per horizon), `csp_bands.csv`
/// and `csp_ratios.csv`.
pub fn forecast(r: &Resolved) -> Result<(), CliError> {
    let output = load_chains(&r.output_dir)?;
    let split: SplitFile = read_json(&r.output_dir, SPLIT, "elicit")?;
    let state = split.current.last_state();
    let elapsed = r.elapsed_days.unwrap_or(split.current.censored());
    let table = csp_posterior(&output, state, elapsed, &r.horizons, r.level)?;
    write_with(&r.output_dir, CSP, |w| write_csp_wide(&table, w))?;
    write_with(&r.output_dir, CSP_BANDS, |w| table.write_csv(w))?;
    let mut curves = csp_ratios(&output, elapsed, &r.horizons, RatioKind::SourceFixed)?;
    curves.extend(csp_ratios(&output, elapsed, &r.horizons, RatioKind::DestinationFixed)?);
    write_with(&r.output_dir, CSP_RATIOS, |w| write_rows_csv(&ratio_rows(&curves), w))?;
    Ok(())
}

/// Refits the catalog truncated at each configured end date. Writes
/// `backtest.csv`.
pub fn run_backtest(r: &Resolved) -> Result<(), CliError> {
    if r.backtest_ends.is_empty() {
        return Err(CliError::Config(
            "no backtest end dates (set \"backtest_ends\" or pass --backtest-end)".into(),
        ));
    }
    let catalog = load_catalog(r.catalog_path()?)?;
    let entries = backtest(&catalog, &r.space, &r.backtest_ends, &r.settings, &r.horizons, r.level);
    write_with(&r.output_dir, BACKTEST, |w| {
        write_backtest_wide(&entries, &r.horizons, w)
    })
}

/// Synthetic catalog summary printed by the `simulate` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Simulated {
    pub catalog: PathBuf,
    pub events: usize,
    pub end: String,
    pub sha256: String,
}

/// Simulates `horizon_days` of the model from `origin` and writes the
/// events as a catalog CSV. The end date reproduces the censored tail.
pub fn simulate(
    model_path: &Path,
    space: &StateSpace,
    horizon_days: f64,
    origin: &NaiveDateTime,
    seed: u64,
    out: &Path,
) -> Result<Simulated, CliError> {
    let text = std::fs::read_to_string(model_path).map_err(|e| CliError::io(model_path, e))?;
    let model: TrueModel = serde_json::from_str(&text).map_err(|e| CliError::Core(e.into()))?;
    let seq = generate_mrp(&model, horizon_days, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let catalog = sequence_to_catalog(&seq, space, origin)?;
    let dir = out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = out
        .file_name()
        .ok_or_else(|| CliError::Config(format!("not a file path: {}", out.display())))?;
    write_with(dir, &name.to_string_lossy(), |w| catalog.to_csv_writer(w))?;
    Ok(Simulated {
        catalog: out.to_path_buf(),
        events: catalog.len(),
        end: format_date(&add_days(origin, horizon_days)),
        sha256: file_digest(out)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Choices made from the data during the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decisions {
    pub end_date: String,
    pub events: usize,
    pub cut_event: usize,
    pub cut_date: String,
    pub historical_transitions: usize,
    pub current_transitions: usize,
    /// One-based.
    pub last_state: usize,
    pub elapsed_days: f64,
    pub quantile_repairs: Vec<QuantileRepair>,
}

/// Everything needed to reproduce the artifacts from the input catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: RunConfig,
    pub inputs: BTreeMap<String, InputDigest>,
    pub decisions: Decisions,
    pub artifacts: BTreeMap<String, String>,
}

/// Runs elicit, fit, summarize and forecast (and the backtest when end
/// dates are configured), then writes `manifest.json`.
pub fn run_pipeline(r: &Resolved) -> Result<Manifest, StageFailure> {
    let elicited = elicit(r).map_err(|e| StageFailure::new("elicit", e))?;
    fit(r).map_err(|e| StageFailure::new("fit", e))?;
    summarize(r).map_err(|e| StageFailure::new("summarize", e))?;
    forecast(r).map_err(|e| StageFailure::new("forecast", e))?;
    let mut names = vec![
        SEQUENCE,
        SPLIT,
        PRIORS,
        CHAINS,
        CHAINS_META,
        SUMMARY,
        PREDICTIVE,
        PREDICTIVE_TRANSITIONS,
        CSP,
        CSP_BANDS,
        CSP_RATIOS,
    ];
    if !r.backtest_ends.is_empty() {
        run_backtest(r).map_err(|e| StageFailure::new("backtest", e))?;
        names.push(BACKTEST);
    }
    let manifest = (|| -> Result<Manifest, CliError> {
        let catalog = r.catalog_path()?;
        let mut inputs = BTreeMap::new();
        inputs.insert(
            "catalog".to_string(),
            InputDigest {
                path: catalog.to_path_buf(),
                sha256: file_digest(catalog)?,
            },
        );
        let mut artifacts = BTreeMap::new();
        for name in names {
            artifacts.insert(name.to_string(), file_digest(&r.output_dir.join(name))?);
        }
        let current = &elicited.split.current;
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: r.to_config(),
            inputs,
            decisions: Decisions {
                end_date: elicited.split.end_date.clone(),
                events: elicited.events,
                cut_event: elicited.split.cut_event,
                cut_date: elicited.split.cut_date.clone(),
                historical_transitions: elicited.split.historical.num_transitions(),
                current_transitions: current.num_transitions(),
                last_state: current.last_state() + 1,
                elapsed_days: r.elapsed_days.unwrap_or(current.censored()),
                quantile_repairs: elicited.priors.repairs.clone(),
            },
            artifacts,
        };
        write_json(&r.output_dir, MANIFEST, &manifest)?;
        Ok(manifest)
    })()
    .map_err(|e| StageFailure::new("manifest", e))?;
    Ok(manifest)
}
