use thiserror::Error;

/// Errors surfaced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounding box ({x_min}, {y_min}, {x_max}, {y_max}): {reason}")]
    InvalidBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
        reason: &'static str,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("trace parse error at line {line}: {message}")]
    TraceParse { line: u64, message: String },

    #[error("trace validation error at line {line}: {message}")]
    TraceValidation { line: u64, message: String },

    #[error("snapshot parse error at line {line}: {message}")]
    SnapshotParse { line: u64, message: String },

    #[error("unknown profile preset `{0}`")]
    UnknownPreset(String),

    #[error("unknown peer camera {0}")]
    UnknownPeer(usize),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
