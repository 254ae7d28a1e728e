use thiserror::Error;

use crate::solve::SolveReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid degree {degree}: spline degree must be at least {min}")]
    InvalidDegree { degree: usize, min: usize },

    #[error("invalid continuity {continuity} for degree {degree}: expected -1 <= q <= p-1")]
    InvalidContinuity { degree: usize, continuity: i32 },

    #[error("derivative order {order} exceeds degree {degree}")]
    DerivativeOrder { order: usize, degree: usize },

    #[error("point {x} lies outside [0, 1]")]
    OutOfDomain { x: f64 },

    #[error("unsupported quadrature order {n}: expected 1..=16")]
    UnsupportedOrder { n: usize },

    #[error("interval [{lo}, {hi}] is not aligned with the breakpoints of both spaces")]
    MisalignedInterval { lo: f64, hi: f64 },

    #[error("subdomain corner {value} is not on a knot line")]
    MisalignedSubdomain { value: f64 },

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is not symmetric: |a_ij - a_ji| = {gap:e} at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("matrix is not positive definite: pivot {pivot:e} at row {row}")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("iterative refinement stalled at backward error {:e}", report.residual_norm)]
    RefinementStalled {
        solution: Vec<f64>,
        report: SolveReport,
    },

    #[error("matrix is not block diagonal: coupled block of size {size} exceeds {max}")]
    NotBlockDiagonal { size: usize, max: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
