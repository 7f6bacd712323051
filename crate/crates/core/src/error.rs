use std::path::PathBuf;

use thiserror::Error;

use crate::model::ProsumerId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the market core.
///
/// Everything except [`Error::Io`] is an input-validation failure; see
/// [`Error::is_validation`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("prosumer {prosumer}, interval {interval}: {field} must be finite and non-negative, got {value}")]
    InvalidQuantity {
        prosumer: ProsumerId,
        interval: usize,
        field: &'static str,
        value: f64,
    },

    #[error("{what} must be finite and non-negative, got {value}")]
    NegativeInput { what: &'static str, value: f64 },

    #[error("prosumer {prosumer} has {found} intervals, expected {expected}")]
    RaggedProfiles {
        prosumer: ProsumerId,
        expected: usize,
        found: usize,
    },

    #[error("prosumer {prosumer} uses {found}-minute intervals, expected {expected}")]
    IntervalLengthMismatch {
        prosumer: ProsumerId,
        expected: u32,
        found: u32,
    },

    #[error("duplicate prosumer id {0}")]
    DuplicateProsumer(ProsumerId),

    #[error("unknown prosumer id {0}")]
    UnknownProsumer(ProsumerId),

    #[error("invalid prices: grid sell price ({grid_sell}) must exceed grid buy price ({grid_buy}) and both must be positive")]
    InvalidPrices { grid_sell: f64, grid_buy: f64 },

    #[error("invalid emissions factor {0}: must be finite and non-negative")]
    InvalidEmissionsFactor(f64),

    #[error("{players} players exceeds the brute-force cap of {cap}")]
    CapExceeded { players: usize, cap: usize },

    #[error("allocation has {found} entries for a game with {expected} players")]
    AllocationSize { expected: usize, found: usize },

    #[error("allocation is not efficient: sums to {allocated}, grand coalition value is {value}")]
    InefficientAllocation { allocated: f64, value: f64 },

    #[error("{0}: no such file")]
    MissingFile(PathBuf),

    #[error("no prosumers")]
    NoProsumers,

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        column: String,
        message: String,
    },

    #[error("{path}: line {line}, column {column}: negative value {value}")]
    NegativeCell {
        path: PathBuf,
        line: u64,
        column: &'static str,
        value: f64,
    },

    #[error("{path}: prosumer {prosumer} interval {interval} appears twice (line {line})")]
    DuplicateRow {
        path: PathBuf,
        prosumer: ProsumerId,
        interval: usize,
        line: u64,
    },

    #[error("{path}: prosumer {prosumer} timestamps misaligned: expected interval {expected}, found {found}")]
    Misaligned {
        path: PathBuf,
        prosumer: ProsumerId,
        expected: usize,
        found: usize,
    },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by bad input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
