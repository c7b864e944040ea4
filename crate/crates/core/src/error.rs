use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("expected a `{expected}` file, found kind `{found}`")]
    WrongKind { expected: String, found: String },

    /// A structural or numerical invariant of the input does not hold.
    #[error("invalid model at node `{node}`: {rule}")]
    Invariant { node: String, rule: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    /// Zero is outside the convex hull of the price increments at this node.
    #[error("node `{node}` admits arbitrage: no martingale measure on its successors")]
    Arbitrage { node: String },

    #[error("brute-force search space {size} exceeds cap {cap}")]
    CapExceeded { size: u128, cap: u128 },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NonSymmetric(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invariant(node: impl Into<String>, rule: impl Into<String>) -> Self {
        Error::Invariant {
            node: node.into(),
            rule: rule.into(),
        }
    }
}
