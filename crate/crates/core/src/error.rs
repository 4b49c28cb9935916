use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("self-edge on `{0}`")]
    SelfEdge(String),
    #[error("edge set contains a directed cycle through `{0}`")]
    Cycle(String),
    #[error("conditioning set overlaps the queried pair at `{0}`")]
    Overlap(String),
    #[error("query endpoints must differ, got `{0}` twice")]
    SameNode(String),
    #[error("invalid noise `{name}`: {reason}")]
    InvalidNoise { name: String, reason: String },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("`{x}` is not a parent of `{y}`")]
    NotAParent { x: String, y: String },
    #[error("non-finite value while evaluating `{node}` at row {row}")]
    NonFinite { node: String, row: usize },
    #[error("unknown preset `{name}`; valid presets: {valid}")]
    UnknownPreset { name: String, valid: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("column `{0}` has zero variance")]
    Degenerate(String),
    #[error("stratum of size {size} is below the minimum {min}; use more rows or a smaller stratum size")]
    StratumTooSmall { size: usize, min: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
