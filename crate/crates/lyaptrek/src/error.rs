//! Error type shared by every module in the crate.

use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong while validating a model or running a
/// computation. Construction-time validation errors and numerical
/// failures share one enum so callers can match on a single type.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A matrix was created with zero rows or columns.
    EmptyMatrix,
    /// Two operands (or a matrix and the dimension implied by the
    /// operation) do not agree in shape.
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    /// A matrix that must be symmetric (noise covariance) has an entry
    /// pair differing by more than the absolute tolerance 1e-12.
    AsymmetricC { row: usize, col: usize, delta: f64 },
    /// The drift matrix is not stable (some eigenvalue has nonnegative
    /// real part, as witnessed by the contraction search failing).
    NotStable,
    /// A matrix required to be positive semidefinite has a pivot below
    /// the tolerance floor in the pivoted Cholesky check.
    NotPsd { pivot: f64 },
    /// The linear system for the covariance could not be solved (or its
    /// residual check failed); with a stable drift this is unreachable.
    SingularSystem,
    /// A node index is outside `0..d`.
    NodeOutOfRange { node: usize, d: usize },
    /// A trek uses an edge whose weight is zero in the supplied
    /// matrices. `blunt` distinguishes the covariance edge at the top
    /// from a directed edge on one of the sides.
    IncompatibleEdge {
        tail: usize,
        head: usize,
        blunt: bool,
    },
    /// An operation that requires every drift diagonal entry to equal
    /// -1 saw a different value.
    DiagonalNotMinusOne { node: usize, value: f64 },
    /// A drift diagonal entry lies outside the range required by the
    /// operation (typically `[-1, 0)` after rescaling).
    DiagonalOutOfRange { node: usize, value: f64 },
    /// The directed part of the base graph contains a cycle, so no
    /// topological order (and no finite trek polynomial) exists.
    CyclicGraph,
    /// A series argument `lambda_i = m_ii + 1` lies outside (-1, 1).
    LambdaOutOfRange { node: usize, value: f64 },
    /// A truncated series failed to certify its tolerance within the
    /// iteration cap.
    NoConvergence { terms: usize },
    /// The argument of the hypergeometric-style series lies outside
    /// its open disc of convergence `|z| < 1/2`.
    ZOutOfRange { value: f64 },
    /// A matrix expected to be (lower) triangular is not.
    NotTriangular,
    /// `I - B` is numerically singular in a linear structural model.
    SingularIminusB,
    /// A documented precondition not covered by a more specific
    /// variant was violated.
    Precondition(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyMatrix => write!(f, "matrix must have at least one row and column"),
            Error::DimensionMismatch { expected, found } => write!(
                f,
                "dimension mismatch: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::AsymmetricC { row, col, delta } => write!(
                f,
                "noise covariance is not symmetric: entries ({row}, {col}) and ({col}, {row}) differ by {delta:e}"
            ),
            Error::NotStable => write!(f, "drift matrix is not stable"),
            Error::NotPsd { pivot } => write!(
                f,
                "matrix is not positive semidefinite (pivot {pivot:e} below tolerance)"
            ),
            Error::SingularSystem => write!(f, "covariance system is numerically singular"),
            Error::NodeOutOfRange { node, d } => {
                write!(f, "node index {node} out of range for {d} nodes")
            }
            Error::IncompatibleEdge { tail, head, blunt } => {
                let kind = if *blunt { "blunt" } else { "directed" };
                write!(
                    f,
                    "trek uses a {kind} edge {tail} - {head} whose weight is zero"
                )
            }
            Error::DiagonalNotMinusOne { node, value } => write!(
                f,
                "diagonal drift entry at node {node} must be -1, found {value}"
            ),
            Error::DiagonalOutOfRange { node, value } => write!(
                f,
                "diagonal drift entry {value} at node {node} outside the admissible range"
            ),
            Error::CyclicGraph => write!(f, "directed part of the base graph is cyclic"),
            Error::LambdaOutOfRange { node, value } => write!(
                f,
                "series argument {value} at node {node} outside (-1, 1)"
            ),
            Error::NoConvergence { terms } => {
                write!(f, "series did not converge within {terms} terms")
            }
            Error::ZOutOfRange { value } => {
                write!(f, "series argument {value} outside the disc |z| < 1/2")
            }
            Error::NotTriangular => write!(f, "matrix is not lower triangular"),
            Error::SingularIminusB => write!(f, "I - B is numerically singular"),
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
