use std::path::PathBuf;

use thiserror::Error;

use crate::evt::GevParams;
use crate::graph::GraphViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("invalid task graph: {}", join_violations(.0))]
    InvalidGraph(Vec<GraphViolation>),

    #[error("cycle detected through edge {from} -> {to}")]
    Cycle { from: usize, to: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("degenerate input: all block maxima are equal")]
    DegenerateInput,

    #[error("GEV fit did not converge after {iterations} iterations (best: {best:?})")]
    FitNotConverged { iterations: usize, best: GevParams },

    #[error("deadline too tight for local execution")]
    InfeasibleInstance,

    #[error("no feasible slot for node {node}: range [{t_min}, {t_max}] is empty")]
    NoFeasibleSlot { node: usize, t_min: i64, t_max: i64 },

    #[error("no candidate column")]
    NoColumn,

    #[error("oracle limited to {cap} nodes, graph has {nodes}")]
    OracleCapExceeded { nodes: usize, cap: usize },

    #[error("trace exhausted after {consumed} {direction} transfers")]
    TraceExhausted { direction: &'static str, consumed: usize },

    #[error("graph is not a {0} instance")]
    WrongShape(&'static str),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn join_violations(v: &[GraphViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
