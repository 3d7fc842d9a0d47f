//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by constructors and operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operator order outside the derived range {1, 2}.
    UnsupportedOrder(usize),
    /// A parameter violated a domain invariant (field name, explanation).
    InvalidParameter(&'static str, String),
    /// Root set is not closed under complex conjugation.
    ConjugateClosure(String),
    /// A sampling grid could not be built (tau >= period).
    EmptyGrid { tau: f64, period: f64 },
    /// Input length too short or mismatched for the operation.
    DimensionMismatch(String),
    /// Matrix contained non-finite entries where finiteness is required.
    NonFiniteMatrix,
    /// Matrix exceeds the desk-scale size contract.
    MatrixTooLarge { n: usize, max: usize },
    /// Dense solve hit a numerically singular matrix.
    SingularSystem { cond_estimate: f64 },
    /// Green's function construction needs pairwise-distinct roots.
    RepeatedRoots,
    /// Kernel width estimation collapsed (all samples coincide).
    DegenerateKernel,
    /// A graph node id does not exist.
    InvalidNodeId(usize),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::UnsupportedOrder(h) => {
                write!(f, "operator order {h} is not supported (only orders 1 and 2 are derived)")
            }
            Error::InvalidParameter(name, why) => write!(f, "invalid parameter `{name}`: {why}"),
            Error::ConjugateClosure(why) => {
                write!(f, "root set is not closed under conjugation: {why}")
            }
            Error::EmptyGrid { tau, period } => {
                write!(f, "sampling step {tau} does not fit one sample into period {period}")
            }
            Error::DimensionMismatch(why) => write!(f, "dimension mismatch: {why}"),
            Error::NonFiniteMatrix => write!(f, "matrix has non-finite entries"),
            Error::MatrixTooLarge { n, max } => {
                write!(f, "matrix dimension {n} exceeds the supported maximum {max}")
            }
            Error::SingularSystem { cond_estimate } => {
                write!(f, "numerically singular system (condition estimate {cond_estimate:e})")
            }
            Error::RepeatedRoots => {
                write!(f, "repeated characteristic roots are not supported by the kernel expansion")
            }
            Error::DegenerateKernel => {
                write!(f, "kernel width estimate is zero (all samples coincide)")
            }
            Error::InvalidNodeId(id) => write!(f, "graph node id {id} does not exist"),
        }
    }
}

impl core::error::Error for Error {}
