use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A constructor argument was out of range.
    InvalidArgument(String),
    /// Chord slopes of an interpolated function were not non-decreasing.
    NotConvexOnGrid { index: usize },
    /// A representative point was requested on an unbounded component.
    UnboundedComponent,
    /// Conditional expectation over a set of zero probability.
    ZeroProbability { lo: f64, hi: f64 },
    /// The distribution has no finite mean.
    InfiniteMean,
    /// Extreme-point construction needs an equal-probability partition.
    NotEquiprobable,
    /// A mean-preserving spread weight came out negative.
    NegativeWeight { index: usize, weight: f64 },
    /// Sizes of inputs do not agree with the model.
    DimensionMismatch(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NotConvexOnGrid { index } => {
                write!(f, "input not convex on grid (chord slope decreases at knot {index})")
            }
            Error::UnboundedComponent => f.write_str("representative rule needs compact support"),
            Error::ZeroProbability { lo, hi } => {
                write!(f, "interval ({lo}, {hi}] has zero probability")
            }
            Error::InfiniteMean => f.write_str("conditional mean undefined: distribution has no finite mean"),
            Error::NotEquiprobable => f.write_str("extreme-point sampling needs an equal-probability partition"),
            Error::NegativeWeight { index, weight } => {
                write!(f, "negative extreme-point weight {weight:e} at point {index}")
            }
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
