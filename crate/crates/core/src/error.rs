use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("image dimensions must be non-zero (got {width}x{height})")]
    EmptyImage { width: usize, height: usize },
    #[error("expected {expected} values for the given dimensions, found {found}")]
    ValueCount { expected: usize, found: usize },
    #[error("probability value {value} at index {index} is outside [0, 1]")]
    ProbabilityRange { index: usize, value: f64 },
    #[error("dimension mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },
    #[error("non-binary sample {value} at index {index} (strict masks accept only 0 and 255)")]
    NonBinarySample { index: usize, value: u16 },
    #[error("unsupported sample depth {0} (expected 8 or 16)")]
    SampleDepth(u8),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("image must have even dimensions to be quartered (got {width}x{height})")]
    OddDimensions { width: usize, height: usize },
    #[error("image must be square (got {width}x{height})")]
    NotSquare { width: usize, height: usize },
    #[error("label {0} does not exist")]
    UnknownLabel(u32),
    #[error("pixel ({r}, {g}, {b}) at index {index} is not a palette color")]
    NotInPalette { index: usize, r: u8, g: u8, b: u8 },
    #[error("manifest invariant violated: {0}")]
    Manifest(String),
    #[error("could not place {requested} seeds with minimum spacing {min_distance} after {attempts} attempts")]
    SeedPlacement {
        requested: usize,
        min_distance: f64,
        attempts: usize,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty input: {0}")]
    Empty(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
