use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("cross-cluster {m}-regular assignment is infeasible for n={n} with l={l} clusters")]
    ClusteringInfeasible { n: usize, m: usize, l: usize },

    #[error("assignment is not cluster-respecting: reviewer {reviewer} reviews {reviewee} in its own cluster")]
    NotClusterRespecting { reviewer: usize, reviewee: usize },

    #[error("apportionment targets sum to {sum}, which is not an integer")]
    NonIntegralTotal { sum: f64 },

    #[error("target size {target} unreachable: expected size spans [{low}, {high}]")]
    UnreachableTarget { target: f64, low: f64, high: f64 },

    #[error("cell (n={n}, m={m}, k={k}, l={l}): {source}")]
    Cell {
        n: usize,
        m: usize,
        k: usize,
        l: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
}
