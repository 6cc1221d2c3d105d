use std::path::PathBuf;

use thiserror::Error;

/// Which way a pair of circles fails to intersect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CircleDomain {
    /// One circle lies strictly inside the other (`d < |R - r|`).
    Nested,
    /// The circles are separated (`d > R + r`).
    Disjoint,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid norm index {0}: finite p must be >= 1")]
    InvalidNorm(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("circles do not intersect ({domain:?}): R={big_r}, r={small_r}, d={d}")]
    CircleDomain {
        domain: CircleDomain,
        big_r: f64,
        small_r: f64,
        d: f64,
    },

    #[error("empty point set")]
    EmptyInput,

    #[error("point ({x}, {y}) is outside the region this formula covers: {reason}")]
    OutsideDomain { x: f64, y: f64, reason: &'static str },

    #[error("unsupported norm pair (p={p}, q={q})")]
    UnsupportedPair { p: String, q: String },

    #[error("resource guard: {points} sampled points requested, limit is {limit}")]
    ResourceGuard { points: u128, limit: u128 },

    #[error("singular regression design: {0}")]
    SingularDesign(String),

    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
