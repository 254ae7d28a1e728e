//! Weighted least-squares formulations of the forward Poisson problem and of
//! a partially observed inverse source problem, discretized with
//! tensor-product B-splines on the unit square.
//!
//! The crate is organized bottom-up:
//!
//! * [`quadrature`], [`spline`]: Gauss–Legendre rules and uniform open B-spline spaces.
//! * [`tensor`], [`assembly`]: tensor-product spaces and Kronecker-factored Gramians.
//! * [`solve`]: equilibrated envelope Cholesky with iterative refinement, and block condensation.
//! * [`forward`], [`inverse`]: the two least-squares problems and their parameter studies.
//! * [`metrics`], [`cases`], [`field`]: error norms and manufactured solutions.
//! * [`table`]: CSV and Markdown emission of study results.

pub mod assembly;
pub mod cases;
pub mod dd;
pub mod error;
pub mod field;
pub mod forward;
pub mod inverse;
pub mod metrics;
pub mod quadrature;
pub mod solve;
pub mod sparse;
pub mod spline;
pub mod table;
pub mod tensor;

pub use error::{Error, Result};
pub use field::{Derivs2, Field};
pub use metrics::ErrorReport;
pub use solve::{SolveOptions, SolveReport, SparseSymmetricSystem};
pub use sparse::SparseMatrix;
pub use spline::{make_space, SplineSpace};
pub use tensor::{Rect, TensorSpace};
