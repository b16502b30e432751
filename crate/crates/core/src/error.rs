//! Error type shared by all planefold modules.

use std::fmt;

/// Errors raised by view construction, kernel builders, and the cache
/// simulator. Contract violations that a correct caller can always avoid
/// (e.g. out-of-bounds element access inside the executor) are debug
/// assertions instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Extent is not a power of two (or zero).
    NotPowerOfTwo { what: &'static str, got: u64 },
    /// Attempted to split a view of side 1.
    DegenerateSplit { what: &'static str },
    /// Operand shapes do not conform.
    ShapeMismatch { what: &'static str },
    /// Plane count is outside the legal range or has the wrong radix.
    InvalidPlaneCount { got: u64, expect: String },
    /// Rank vector is not a permutation of 1..=d.
    NotAPermutation,
    /// Loop-order permutation is invalid for the given loop count.
    InvalidLoopOrder,
    /// Contraction with an empty contracted index group.
    UnsupportedOuterProduct,
    /// Axis specification is inconsistent (group sizes, duplicate subscripts).
    BadAxisSpec { what: String },
    /// Cache configuration is unusable (e.g. capacity below one line).
    CacheConfig { what: String },
    /// Unknown algorithm identifier.
    UnknownAlgo { got: String },
    /// Malformed binary tensor or trace file.
    Format { what: String },
    /// Underlying I/O failure.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotPowerOfTwo { what, got } => {
                write!(f, "{what} must be a positive power of two, got {got}")
            }
            Error::DegenerateSplit { what } => {
                write!(f, "cannot split {what} of side 1")
            }
            Error::ShapeMismatch { what } => write!(f, "shape mismatch: {what}"),
            Error::InvalidPlaneCount { got, expect } => {
                write!(f, "invalid plane count {got}, expected {expect}")
            }
            Error::NotAPermutation => write!(f, "rank vector is not a permutation"),
            Error::InvalidLoopOrder => write!(f, "loop order is not a valid permutation"),
            Error::UnsupportedOuterProduct => {
                write!(
                    f,
                    "contraction requires at least one contracted index (x >= 1)"
                )
            }
            Error::BadAxisSpec { what } => write!(f, "bad axis spec: {what}"),
            Error::CacheConfig { what } => write!(f, "cache config: {what}"),
            Error::UnknownAlgo { got } => write!(f, "unknown algorithm: {got}"),
            Error::Format { what } => write!(f, "format error: {what}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Checks that `v` is a positive power of two.
pub(crate) fn require_pow2(what: &'static str, v: u64) -> Result<()> {
    if v == 0 || !v.is_power_of_two() {
        return Err(Error::NotPowerOfTwo { what, got: v });
    }
    Ok(())
}
