// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Errors raised by validation and the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CssdError {
    #[error("input contains no samples")]
    EmptyInput,
    #[error("non-finite value in sample {index}")]
    NonFiniteValue { index: usize },
    #[error("standard deviation of sample {index} is not positive")]
    NonPositiveDelta { index: usize },
    #[error("sample {index} has {found} ordinate components, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("sample sites are not strictly increasing at index {index}")]
    NotStrictlyIncreasing { index: usize },
    #[error("at least {required} samples are required, got {found}")]
    TooFewPoints { required: usize, found: usize },
    #[error("smoothing weight p must lie in (0, 1), got {0}")]
    InvalidP(f64),
    #[error("jump penalty gamma must be positive, got {0}")]
    InvalidGamma(f64),
    #[error("gap width must be positive, got {0}")]
    NonPositiveGap(f64),
    #[error("abscissa {x} does not exceed the last absorbed site {last}")]
    NonIncreasingX { x: f64, last: f64 },
    #[error("index range {start}..={end} invalid for {len} samples")]
    InvalidRange {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("invalid discontinuity set: {0}")]
    InvalidDiscontinuities(String),
    #[error("invalid segment spline: {0}")]
    InvalidSegment(String),
    #[error("evaluation point {t} outside segment domain [{a}, {b}]")]
    OutOfDomain { t: f64, a: f64, b: f64 },
    #[error("traceback table is inconsistent: {0}")]
    CorruptTraceback(String),
    #[error("fold count {k} invalid for {n} samples")]
    BadFoldCount { k: usize, n: usize },
    #[error("fold {fold} leaves no training data")]
    DegenerateFold { fold: usize },
    #[error("evaluation budget must be at least 1")]
    ZeroBudget,
    #[error("brute-force oracle limited to {max} samples, got {n}")]
    TooLargeForOracle { n: usize, max: usize },
    #[error("dense oracle failed: {0}")]
    OracleFailure(String),
}

impl CssdError {
    /// Whether the error stems from malformed input rather than numerics.
    pub fn is_data_error(&self) -> bool {
        !matches!(
            self,
            CssdError::OracleFailure(_) | CssdError::CorruptTraceback(_)
        )
    }
}

pub type Result<T, E = CssdError> = std::result::Result<T, E>;
