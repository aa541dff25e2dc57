//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("elevation {0} deg outside [-90, 90]")]
    OutOfRangeElevation(f64),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("series of length {len} too short for AR order {order}")]
    SeriesTooShort { len: usize, order: usize },

    #[error("history of length {len} shorter than AR order {order}")]
    HistoryTooShort { len: usize, order: usize },

    #[error("LOS reference bin has no entry at any position shared with bin {0}")]
    MissingLosReference(u32),

    #[error("no matched pairs to aggregate")]
    EmptyPairs,

    #[error("all values excluded from MAPE (near-zero truths)")]
    AllValuesExcluded,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}
