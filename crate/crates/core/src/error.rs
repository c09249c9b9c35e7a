use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("non-finite value {value} at index {index}")]
    NonFiniteInput { index: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("tile {rows}x{cols} exceeds array {n_v}x{n_h}")]
    TileTooLarge {
        rows: usize,
        cols: usize,
        n_v: usize,
        n_h: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("softmax argument {0} is positive; max-subtraction must precede exponentiation")]
    PositiveExpArg(f64),

    #[error("recompute task at ({row}, {col}, slice {slice}) was never flagged over-resolution")]
    UnflaggedTask { row: usize, col: usize, slice: usize },

    #[error("missing partial contribution for output ({row}, {col}) slice {slice}")]
    MissingSlice { row: usize, col: usize, slice: usize },

    #[error("shard ({bytes} B) exceeds local SRAM capacity ({capacity} B)")]
    ShardExceedsSram { bytes: usize, capacity: usize },

    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    #[error("trace inconsistent with hardware config: {0}")]
    TraceMismatch(String),

    #[error("baseline metric is zero; comparison undefined")]
    ZeroBaseline,

    #[error("i/o error at byte offset {offset}: {source}")]
    IoAt {
        offset: u64,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
