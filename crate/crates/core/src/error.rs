use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("duplicate edge ({src}, {dst}) in edge type `{edge_type}`")]
    DuplicateEdge {
        edge_type: String,
        src: usize,
        dst: usize,
    },

    #[error("empty selection: a subgraph needs at least one node")]
    EmptySubgraph,

    #[error("no non-isolated center found for node type `{node_type}` after {attempts} attempts")]
    IsolatedCenter { node_type: String, attempts: usize },

    #[error("imbalance ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite gradient in `{param}` at index {index}: {value}")]
    NonFiniteGradient {
        param: String,
        index: usize,
        value: f64,
    },

    #[error("nothing to add: target ratio {alpha} needs {target} minority nodes but {current} already exist")]
    NothingToAdd {
        alpha: f64,
        target: f64,
        current: usize,
    },

    #[error("SMOTE needs at least two minority training nodes, found {0}")]
    SmoteDegenerate(usize),

    #[error("subgraph collection stalled after {attempts} attempts ({collected} of {wanted} collected)")]
    CollectionStall {
        attempts: usize,
        collected: usize,
        wanted: usize,
    },

    #[error("augmentation stalled: {attempts} consecutive subgraphs produced no surviving synthetic node")]
    AugmentationStall { attempts: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("parse error in {}:{line}: {message}", file.display())]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(context: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::Dimension {
            context: context.into(),
            expected,
            got,
        }
    }
}
