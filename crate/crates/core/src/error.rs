use thiserror::Error;

/// Errors raised by the cancellation pipeline and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("constellation order must be a positive even integer, got {0}")]
    InvalidOrder(i64),

    #[error("symbol {symbol} is not a point of the {order}-ary constellation")]
    NotInConstellation { symbol: i32, order: u32 },

    #[error("stream length must be at least 2, got {0}")]
    StreamTooShort(usize),

    #[error("fading correlation must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),

    #[error("invalid tap list: {0}")]
    InvalidTaps(String),

    #[error("length mismatch: {what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("noise variance must be finite and non-negative, got {0}")]
    InvalidNoiseVariance(f64),

    #[error("delay {delay} leaves no adjacent pair to combine in a length-{len} frame")]
    EmptyActiveRange { delay: usize, len: usize },

    #[error("invalid RBP configuration: {0}")]
    InvalidRbpConfig(String),

    #[error("quantization step {step} gives only {points} grid points across the prior support (need at least 16)")]
    GridTooCoarse { step: f64, points: usize },

    #[error("densities are defined on different grids")]
    GridMismatch,

    #[error("message product vanished: densities have disjoint support")]
    DisjointSupport,

    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),

    #[error("config line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("unknown preset `{0}` (expected fig4 .. fig10)")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
