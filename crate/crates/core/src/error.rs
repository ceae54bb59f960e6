use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite field")]
    NonFiniteField,
    #[error("exponent out of range: {0}")]
    ExponentOutOfRange(f64),
    #[error("invalid exponent: p = {0} (need p >= 1)")]
    InvalidExponent(f64),
    #[error("cannot project zero field")]
    ZeroField,
    #[error("source not compactly supported on grid (boundary/max = {0:.3e})")]
    NotCompactlySupported(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("dilation leaves computational box (theta = {0})")]
    DilationLeavesBox(f64),
    #[error("fiber maximum outside dilation window [-{0}, {0}]")]
    FiberMaxOutsideWindow(f64),
    #[error("mass/mu outside truncation window")]
    TruncationWindow,
    #[error("bubble under-resolved: eps = {eps} < 4h = {min}")]
    BubbleUnderResolved { eps: f64, min: f64 },
    #[error("empty seed list")]
    EmptySeeds,
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
