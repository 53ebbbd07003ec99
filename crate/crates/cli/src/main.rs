use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mrp::catalog::{parse_date, StateSpace};
use mrp_cli::config::OUTPUT_DIR_ENV;
use mrp_cli::{stages, with_jobs, CliError, Overrides, RunConfig, StageFailure};

/// Bayesian Markov renewal model with Weibull holding times.
#[derive(Parser)]
#[command(name = "mrp", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Catalog CSV with header `date,magnitude[,id]`.
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
    /// Class thresholds, comma separated and increasing.
    #[arg(long, global = true, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// Observation horizon date (defaults to the last event).
    #[arg(long, global = true)]
    end: Option<String>,
    /// Visits of every transition required before the cut.
    #[arg(long, global = true)]
    min_count: Option<usize>,
    /// Quantile level used for prior elicitation.
    #[arg(long, global = true)]
    q_target: Option<f64>,
    /// Random seed; required here or in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: $MRP_OUTPUT_DIR, then ./mrp-output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Sampler iterations per chain, burn-in included.
    #[arg(long, global = true)]
    iter: Option<usize>,
    /// Iterations discarded at the start of each chain.
    #[arg(long, global = true)]
    burnin: Option<usize>,
    /// Keep every n-th draw.
    #[arg(long, global = true)]
    thin: Option<usize>,
    /// Number of independent chains.
    #[arg(long, global = true)]
    chains: Option<usize>,
    /// Credible level of the reported intervals.
    #[arg(long, global = true)]
    level: Option<f64>,
    /// Backtest end date; repeatable.
    #[arg(long = "backtest-end", global = true)]
    backtest_end: Vec<String>,
    /// Worker threads for chains and backtest dates.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Split the catalog and elicit priors from the historical part.
    Elicit,
    /// Run the Gibbs sampler on the current part.
    Fit,
    /// Posterior summaries and predictive p-values.
    Summarize,
    /// Crossing-state probabilities from the last observed state.
    Forecast,
    /// Refit at each backtest end date and tabulate forecasts.
    Backtest,
    /// Write a synthetic catalog from known parameters.
    Simulate {
        /// JSON with p, alpha, theta and a one-based initial_state.
        #[arg(long)]
        model: PathBuf,
        /// Length of the simulated record in days.
        #[arg(long)]
        horizon_days: f64,
        /// Date of the first event.
        #[arg(long, default_value = "1900-01-01")]
        origin: String,
        /// Catalog to write (default: <out>/catalog.csv).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Elicit, fit, summarize and forecast, then write the manifest.
    All,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            catalog: self.catalog.clone(),
            thresholds: self.thresholds.clone(),
            end: self.end.clone(),
            min_count: self.min_count,
            q_target: self.q_target,
            seed: self.seed,
            output_dir: self.out.clone(),
            n_iter: self.iter,
            n_burnin: self.burnin,
            thin: self.thin,
            n_chains: self.chains,
            level: self.level,
            backtest_ends: (!self.backtest_end.is_empty()).then(|| self.backtest_end.clone()),
        }
    }
}

fn run(cli: Cli) -> Result<(), StageFailure> {
    let stage = match &cli.command {
        Command::Elicit => "elicit",
        Command::Fit => "fit",
        Command::Summarize => "summarize",
        Command::Forecast => "forecast",
        Command::Backtest => "backtest",
        Command::Simulate { .. } => "simulate",
        Command::All => "all",
    };
    let fail = |e: CliError| StageFailure::new(stage, e);
    let env_out = std::env::var(OUTPUT_DIR_ENV).ok();
    let config = RunConfig::load(cli.common.config.as_deref())
        .map_err(fail)?
        .apply(&cli.common.overrides());

    if let Command::Simulate {
        model,
        horizon_days,
        origin,
        output,
    } = &cli.command
    {
        let seed = config.seed.ok_or(CliError::MissingSeed).map_err(fail)?;
        let space = StateSpace::new(config.thresholds.clone()).map_err(|e| fail(e.into()))?;
        let origin = parse_date(origin).map_err(|e| fail(e.into()))?;
        let out_dir = config
            .output_dir
            .clone()
            .or_else(|| env_out.map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(mrp_cli::config::DEFAULT_OUTPUT_DIR));
        let output = output.clone().unwrap_or_else(|| out_dir.join("catalog.csv"));
        let sim = stages::simulate(model, &space, *horizon_days, &origin, seed, &output).map_err(fail)?;
        println!("{}", serde_json::to_string(&sim).expect("serializable"));
        return Ok(());
    }

    let resolved = config.resolve(env_out.as_deref()).map_err(fail)?;
    let jobs = cli.common.jobs;
    let outcome = with_jobs(jobs, || match cli.command {
        Command::Elicit => stages::elicit(&resolved).map(drop).map_err(fail),
        Command::Fit => stages::fit(&resolved).map(drop).map_err(fail),
        Command::Summarize => stages::summarize(&resolved).map_err(fail),
        Command::Forecast => stages::forecast(&resolved).map_err(fail),
        Command::Backtest => stages::run_backtest(&resolved).map_err(fail),
        Command::All => stages::run_pipeline(&resolved).map(drop),
        Command::Simulate { .. } => unreachable!("handled above"),
    })
    .map_err(fail)?;
    outcome
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.to_json());
            ExitCode::FAILURE
        }
    }
}
