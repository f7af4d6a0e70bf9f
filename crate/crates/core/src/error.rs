use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("map line {line}: {msg}")]
    MapParse { line: usize, msg: String },

    #[error("state {0} is not a valid state index")]
    InvalidState(usize),

    #[error("policy row for state {state} sums to {sum}, expected 1")]
    MalformedPolicy { state: usize, sum: f64 },

    #[error("linear system is singular")]
    Singular,

    #[error("empty input")]
    EmptyInput,

    #[error("k = {k} exceeds the {distinct} distinct input vectors")]
    TooManyClusters { k: usize, distinct: usize },

    #[error("need at least {need} states, found {found}")]
    TooFewStates { need: usize, found: usize },

    #[error("map is not connected")]
    Disconnected,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
