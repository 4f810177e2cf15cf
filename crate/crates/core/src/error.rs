use alloc::string::String;
use core::fmt;

/// Input errors raised by the library. Every variant describes a caller
/// mistake; none of the algorithms fail once their inputs are valid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    InvalidVertex { vertex: usize, count: usize },
    InvalidProbability(String),
    NonDivisibleSide { axis: usize, side: usize, block: usize },
    GeometryMismatch(&'static str),
    Boundary(&'static str),
    InvalidParameter(String),
    NotBracketing { low: String, high: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidVertex { vertex, count } => {
                write!(f, "vertex {vertex} out of range (geometry has {count} vertices)")
            }
            Error::InvalidProbability(p) => write!(f, "probability {p} outside [0, 1]"),
            Error::NonDivisibleSide { axis, side, block } => {
                write!(f, "side {side} on axis {axis} is not divisible by block size {block}")
            }
            Error::GeometryMismatch(what) => write!(f, "geometry mismatch: {what}"),
            Error::Boundary(what) => write!(f, "boundary condition: {what}"),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::NotBracketing { low, high } => {
                write!(f, "endpoints do not bracket the target: low {low}, high {high}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_probability(p: f64) -> crate::Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability(alloc::format!("{p}")))
    }
}
