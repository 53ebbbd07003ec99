use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("catalog not found: {}", .0.display())]
    CatalogNotFound(PathBuf),

    #[error("missing {}: run the `{stage}` stage first", .path.display())]
    MissingArtifact { path: PathBuf, stage: &'static str },

    #[error("a seed is required: set \"seed\" in the config or pass --seed")]
    MissingSeed,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] mrp::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Machine-readable tag; core errors keep their own.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::CatalogNotFound(_) => "catalog_not_found",
            CliError::MissingArtifact { .. } => "missing_artifact",
            CliError::MissingSeed => "missing_seed",
            CliError::Config(_) => "invalid_config",
            CliError::Io { .. } => "io",
            CliError::Core(e) => e.kind(),
        }
    }
}

/// A [`CliError`] tagged with the stage that raised it.
#[derive(Debug, thiserror::Error)]
#[error("{stage}: {error}")]
pub struct StageFailure {
    pub stage: &'static str,
    #[source]
    pub error: CliError,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    stage: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    transitions: Option<Vec<[usize; 2]>>,
}

impl StageFailure {
    pub fn new(stage: &'static str, error: impl Into<CliError>) -> Self {
        Self {
            stage,
            error: error.into(),
        }
    }

    /// Single-line JSON for stderr. A failed split also lists the deficient
    /// transitions, one-based.
    pub fn to_json(&self) -> String {
        let transitions = match &self.error {
            CliError::Core(mrp::Error::SplitFailed { deficient, .. }) => {
                Some(deficient.iter().map(|&(i, j)| [i + 1, j + 1]).collect())
            }
            _ => None,
        };
        let report = ErrorReport {
            error: self.error.kind(),
            stage: self.stage,
            message: self.error.to_string(),
            transitions,
        };
        serde_json::to_string(&report).expect("plain strings and integers")
    }
}
