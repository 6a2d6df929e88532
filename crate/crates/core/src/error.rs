//! Shared error type for the recovery library.

use std::fmt;

/// Errors surfaced by mesh construction, model building and the solvers.
///
/// Infeasibility of a linear program is *not* an error; it is a normal
/// outcome and is reported through the solver's result enum instead.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A size or parameter was outside the supported range.
    InvalidArgument(String),
    /// Two meshes that must coincide or be nested (fine = 2*coarse - 1)
    /// do not satisfy that relation.
    NonNestedMeshes { coarse: usize, fine: usize },
    /// The shifted operator K + eps*M is numerically singular.
    SingularOperator { condition_estimate: f64 },
    /// An iterate or matrix entry became NaN/inf.
    NonFinite(String),
    /// The simplex solver hit its pivot cap before reaching an answer.
    /// Distinct from an `Infeasible` outcome, which is a definite answer.
    IterationLimit { pivots: usize },
    /// A source specification rasterized to the zero vector.
    EmptySupport,
    /// Reading or writing an artifact failed.
    Io(String),
    /// A cache or data file had the wrong magic bytes, version or shape.
    Format(String),
    /// A state the algorithms should never reach (e.g. an LP whose
    /// objective is bounded below reported as unbounded).
    Internal(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NonNestedMeshes { coarse, fine } => write!(
                f,
                "meshes are not nested: fine side {fine} is neither {coarse} nor 2*{coarse}-1"
            ),
            Error::SingularOperator { condition_estimate } => write!(
                f,
                "operator is numerically singular (condition estimate {condition_estimate:.3e})"
            ),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::IterationLimit { pivots } => {
                write!(f, "simplex pivot cap reached after {pivots} pivots")
            }
            Error::EmptySupport => write!(f, "source specification has empty support"),
            Error::Io(msg) => write!(f, "io error: {msg}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
