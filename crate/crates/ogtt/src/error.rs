//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid patient parameters: {0}")]
    InvalidParams(String),

    #[error("invalid fixed settings: {0}")]
    InvalidSettings(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid observations: {0}")]
    InvalidObservations(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state became non-finite at t = {time} h (integration blow-up)")]
    NonFiniteState { time: f64 },

    #[error(
        "digestive closed form needs theta2 > c/2 (theta2 = {theta2}, c/2 = {half_c})"
    )]
    Theta2AtPole { theta2: f64, half_c: f64 },

    #[error("could not find two finite-density start points after {attempts} prior draws; the data and model may be incompatible")]
    InitSearchExhausted { attempts: usize },

    #[error("sampler configuration: {0}")]
    InvalidSamplerConfig(String),

    #[error("need at least {needed} kept draws, have {got}")]
    InsufficientDraws { needed: usize, got: usize },

    #[error("posterior sample is empty")]
    EmptySample,

    #[error("{dropped} of {total} posterior draws failed to simulate (> 1% budget)")]
    TooManySimulationFailures { dropped: usize, total: usize },

    #[error("cannot read {path}: {reason}")]
    ReadFile { path: PathBuf, reason: String },

    #[error("cannot write {path}: {reason}")]
    WriteFile { path: PathBuf, reason: String },

    #[error("{path}: line 1: expected header `{expected}`, found `{found}`")]
    CsvHeader {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("{path}: line {line}: {reason}")]
    CsvRow {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: {n} observation rows, need at least 2")]
    TooFewObservations { path: PathBuf, n: usize },

    #[error("config {path}: line {line}: {reason}")]
    Config {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("config {path}: {reason}")]
    ConfigValue { path: PathBuf, reason: String },
}
