//! Error type shared across the library.
//!
//! Certificate violations are ordinary return values, not errors; this type
//! covers resource guards, precondition failures and parse problems.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("resource cap exceeded while {what}: needed {needed}, cap {cap}")]
    ResourceCap {
        what: &'static str,
        needed: u64,
        cap: u64,
    },

    #[error("scale {requested} exceeds validated horizon {horizon}")]
    ScaleExceedsHorizon { requested: u64, horizon: u64 },

    #[error("element not reached within the enumeration cap")]
    NotReached,

    #[error("relation degree exceeds {max_degree}: item {item} has {degree} neighbours")]
    DegreeExceeded {
        item: String,
        degree: usize,
        max_degree: usize,
    },

    #[error("no polynomial fit within the configured constant cap")]
    NoPolynomialFit,

    #[error("no doubling scale found in [{lo}, {hi}]")]
    NoDoublingScale { lo: u64, hi: u64 },

    #[error("freeness violated at point {point}: elements {left} and {right} act identically")]
    FreenessViolation {
        point: u32,
        left: String,
        right: String,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown point identifier {0}")]
    UnknownPoint(u32),

    #[error("invalid group specification `{0}`")]
    BadGroupSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
