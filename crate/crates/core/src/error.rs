use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("CPI table has no entry for year {0}")]
    MissingCpi(i32),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty panel")]
    EmptyPanel,

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("unknown coefficient `{0}`")]
    UnknownCoefficient(String),

    #[error("too few observations: {n_obs} rows for {n_params} parameters")]
    TooFewObservations { n_obs: usize, n_params: usize },

    #[error("no identifiable covariates remain after demeaning")]
    NoIdentifiedCovariates,

    #[error("panel has no quarter before the announcement {0}; no baseline period")]
    NoBaseline(crate::YearQuarter),

    #[error("degenerate synthetic configuration: {0}")]
    DegenerateConfig(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Schema(_) => "schema",
            Error::Parse { .. } => "parse",
            Error::MissingCpi(_) => "missing_cpi",
            Error::Config(_) => "config",
            Error::EmptyPanel => "empty_panel",
            Error::UnknownColumn(_) => "unknown_column",
            Error::UnknownCoefficient(_) => "unknown_coefficient",
            Error::TooFewObservations { .. } => "too_few_observations",
            Error::NoIdentifiedCovariates => "no_identified_covariates",
            Error::NoBaseline(_) => "no_baseline",
            Error::DegenerateConfig(_) => "degenerate_config",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
