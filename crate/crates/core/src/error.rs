//! Error type shared by every module of the crate.

use thiserror::Error;

use crate::prob::Axis;

/// Crate `Result` alias.
pub type Result<T> = core::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// A probability vector failed validation.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    /// Two objects that must share a shape (or axis labelling) do not.
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("axis {0:?} not present")]
    MissingAxis(Axis),
    #[error("axis subset must be nonempty")]
    EmptyAxes,
    /// An enumeration would exceed the configured cap.
    #[error("enumeration needs {required} items, cap is {cap}")]
    EnumerationCap { required: u128, cap: u128 },
    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    /// The requested rate is at or above the mutual information of the input.
    #[error("rate above achievable threshold: rate {rate} >= {threshold}")]
    RateAboveThreshold { rate: f64, threshold: f64 },
    /// `E0(rho)/rho` stays above the rate on the whole admissible interval.
    #[error("no finite root <= {cap}")]
    NoRootBelowCap { cap: f64 },
    /// The simplex solver ran out of iterations on every restart.
    #[error("solver did not converge: best value {best}, marginal residual {residual}")]
    NotConverged { best: f64, residual: f64 },
    #[error("oracle limited to binary alphabets")]
    OracleNotBinary,
    /// A frame carried a non-zero message in a mandated synch slot.
    #[error("stream {stream} slot {slot} must carry the synch word")]
    SynchSlot { stream: u8, slot: usize },
    #[error("invalid frame layout: {0}")]
    InvalidLayout(String),
    #[error("invalid message vector: {0}")]
    InvalidMessages(String),
    /// Channel or operation specification could not be parsed.
    #[error("parse error in {field}: {reason}")]
    Parse { field: String, reason: String },
}

impl Error {
    /// Stable kebab-case name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDistribution(_) => "invalid-distribution",
            Error::ShapeMismatch { .. } => "shape-mismatch",
            Error::MissingAxis(_) => "missing-axis",
            Error::EmptyAxes => "empty-axes",
            Error::EnumerationCap { .. } => "enumeration-cap",
            Error::OutOfRange { .. } => "out-of-range",
            Error::AlphabetMismatch(_) => "alphabet-mismatch",
            Error::RateAboveThreshold { .. } => "rate-above-threshold",
            Error::NoRootBelowCap { .. } => "no-root-below-cap",
            Error::NotConverged { .. } => "not-converged",
            Error::OracleNotBinary => "oracle-not-binary",
            Error::SynchSlot { .. } => "synch-slot",
            Error::InvalidLayout(_) => "invalid-layout",
            Error::InvalidMessages(_) => "invalid-messages",
            Error::Parse { .. } => "parse",
        }
    }
}
