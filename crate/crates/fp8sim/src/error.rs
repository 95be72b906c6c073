//! Crate-wide error type.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Quantization input contained NaN or infinity; callers must sanitize.
    NonFiniteInput { index: usize, value: f64 },
    /// A scale factor must be positive and finite.
    InvalidScale { scale: f64 },
    /// Worker gradients must be non-empty and of equal length.
    MismatchedWorkers { expected: usize, got: usize },
    /// An operation needed at least one worker or device.
    Empty(&'static str),
    /// Shared-scale reduction refused: per-worker scales too far apart.
    ScaleSpread { min: f64, max: f64 },
    /// Tensors in one reduction must share a format and length.
    IncompatibleTensors(&'static str),
    /// An optimizer variable was assigned a storage format outside its
    /// supported set.
    InvalidPrecision(&'static str),
    /// A run configuration failed validation before any work started.
    InvalidConfig(&'static str),
    /// Second-moment state decoded to a negative value.
    CorruptedMoment { index: usize, value: f64 },
    /// A serialized tensor blob failed validation.
    MalformedBlob(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonFiniteInput { index, value } => {
                write!(f, "non-finite input {value} at index {index}")
            }
            Error::InvalidScale { scale } => {
                write!(f, "scale must be positive and finite, got {scale}")
            }
            Error::MismatchedWorkers { expected, got } => {
                write!(f, "worker tensor length {got} does not match {expected}")
            }
            Error::Empty(what) => write!(f, "need at least one {what}"),
            Error::ScaleSpread { min, max } => {
                write!(f, "per-worker scales span more than 2^60 ({min} .. {max})")
            }
            Error::IncompatibleTensors(why) => write!(f, "incompatible tensors: {why}"),
            Error::InvalidPrecision(why) => write!(f, "invalid precision assignment: {why}"),
            Error::InvalidConfig(why) => write!(f, "invalid configuration: {why}"),
            Error::CorruptedMoment { index, value } => {
                write!(f, "second moment at index {index} decoded to {value} < 0")
            }
            Error::MalformedBlob(why) => write!(f, "malformed tensor blob: {why}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
