use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("width mismatch: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },

    #[error("invalid word width {0} (must be 1..=64)")]
    InvalidWidth(u32),

    #[error("bits set beyond width {width}: {bits:#x}")]
    BitsBeyondWidth { bits: u64, width: u32 },

    #[error("value {0} is not a bipolar (+1/-1) value")]
    NotBipolar(i64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid address: {0}")]
    InvalidAddress(String),

    #[error("row {0} was never written")]
    UnwrittenRow(String),

    #[error("line state is not valid (consumed or precharged)")]
    InvalidLine,

    #[error("value {value} out of range [0, {max}]")]
    OutOfRange { value: i64, max: i64 },

    #[error("subclass {subclass} does not match level with {pullups} pull-ups")]
    SubclassMismatch { subclass: usize, pullups: u32 },

    #[error("count {count} is illegal for subclass SC{}", subclass + 1)]
    IllegalCount { subclass: usize, count: i32 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("undefined cost combination: {0}")]
    UndefinedCost(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("malformed network: {0}")]
    Network(String),

    #[error("malformed tensor container: {0}")]
    Tensor(String),

    #[error("layer mismatch between reports: {0}")]
    LayerMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
