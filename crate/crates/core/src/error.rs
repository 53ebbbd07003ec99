use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Formats a list of zero-based transitions as `(1,3), (2,3)`.
fn fmt_transitions(ts: &[(usize, usize)]) -> String {
    ts.iter()
        .map(|(i, j)| format!("({},{})", i + 1, j + 1))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("magnitude {magnitude} below completeness threshold {threshold}")]
    BelowThreshold { magnitude: f64, threshold: f64 },

    #[error("invalid state space: {0}")]
    InvalidStateSpace(String),

    #[error("empty catalog")]
    EmptyCatalog,

    #[error("catalog is not sorted by time at record {index}")]
    UnsortedCatalog { index: usize },

    #[error("records {first} and {second} share the same timestamp (zero holding time)")]
    DuplicateTimestamp { first: usize, second: usize },

    #[error("horizon {horizon} precedes the last event at {last}")]
    HorizonBeforeLastEvent { horizon: f64, last: f64 },

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("no prefix has at least {min_count} visits to every transition; deficient: {}", fmt_transitions(.deficient))]
    SplitFailed {
        min_count: usize,
        deficient: Vec<(usize, usize)>,
    },

    #[error("empty sample")]
    EmptySample,

    #[error("quantile order {0} outside (0, 1)")]
    InvalidQuantileOrder(f64),

    #[error("quantile multiplier overflows for q = {q}, m = {m}")]
    QuantileOverflow { q: f64, m: usize },

    #[error("prior for transition ({},{}) cannot be made proper for any q up to 0.95", .i + 1, .j + 1)]
    ImproperPrior { i: usize, j: usize },

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("Dirichlet floor must be positive, got {0}")]
    InvalidFloor(f64),

    #[error("adaptive rejection sampler exceeded {limit} rejections")]
    TooManyRejections { limit: usize },

    #[error("log-density lies above its tangent envelope at {x} (not log-concave)")]
    NotLogConcave { x: f64 },

    #[error("adaptive rejection sampler setup failed: {0}")]
    ArsSetup(String),

    #[error("censored time incompatible with parameters")]
    CensoredIncompatible,

    #[error("elapsed time incompatible with parameters")]
    ElapsedIncompatible,

    #[error("chain {chain} aborted at sweep {sweep} while updating {coordinate}: {source}")]
    ChainAborted {
        chain: usize,
        sweep: usize,
        coordinate: String,
        #[source]
        source: Box<Error>,
    },

    #[error("need at least {needed} draws, got {got}")]
    TooFewDraws { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid date {0:?}")]
    InvalidDate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::BelowThreshold { .. } => "below_threshold",
            Error::InvalidStateSpace(_) => "invalid_state_space",
            Error::EmptyCatalog => "empty_catalog",
            Error::UnsortedCatalog { .. } => "unsorted_catalog",
            Error::DuplicateTimestamp { .. } => "duplicate_timestamp",
            Error::HorizonBeforeLastEvent { .. } => "horizon_before_last_event",
            Error::InvalidSequence(_) => "invalid_sequence",
            Error::SplitFailed { .. } => "split_failed",
            Error::EmptySample => "empty_sample",
            Error::InvalidQuantileOrder(_) => "invalid_quantile_order",
            Error::QuantileOverflow { .. } => "quantile_overflow",
            Error::ImproperPrior { .. } => "improper_prior",
            Error::InvalidPrior(_) => "invalid_prior",
            Error::InvalidFloor(_) => "invalid_floor",
            Error::TooManyRejections { .. } => "too_many_rejections",
            Error::NotLogConcave { .. } => "not_log_concave",
            Error::ArsSetup(_) => "ars_setup",
            Error::CensoredIncompatible => "censored_incompatible",
            Error::ElapsedIncompatible => "elapsed_incompatible",
            Error::ChainAborted { .. } => "chain_aborted",
            Error::TooFewDraws { .. } => "too_few_draws",
            Error::InvalidConfig(_) => "invalid_config",
            Error::InvalidModel(_) => "invalid_model",
            Error::InvalidDate(_) => "invalid_date",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
