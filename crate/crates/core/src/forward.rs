//! Least-squares forward Poisson problem with a weighted boundary penalty.
//!
//! Minimizes `‖-Δv - f‖²_Ω + α² ‖v - g‖²_∂Ω` over `S(p,ℓ,p-1) ⊗ S(p,ℓ,p-1)`
//! without essential boundary conditions. The normal equations are
//! `(Δu, Δv)_Ω + α² (u, v)_∂Ω = (f, -Δv)_Ω + α² (g, v)_∂Ω`.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{boundary_mass, laplace_gramian_2d, load_vector_dd, LoadAction};
use crate::cases::{example1_case, ManufacturedCase};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::metrics::{field_error, field_norms, ErrorReport};
use crate::solve::{factor_and_solve, SolveOptions, SolveReport, SparseSymmetricSystem};
use crate::sparse::SparseMatrix;
use crate::spline::make_space;
use crate::tensor::{Rect, TensorSpace};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForwardConfig {
    pub degree: usize,
    pub level: u32,
    pub alpha2: f64,
    pub k: u32,
}

impl ForwardConfig {
    pub fn validate(&self) -> Result<()> {
        if self.degree < 2 {
            return Err(Error::InvalidParameter {
                name: "p",
                reason: format!("degree {} < 2; second derivatives are required", self.degree),
            });
        }
        if !(self.alpha2 > 0.0) || !self.alpha2.is_finite() {
            return Err(Error::InvalidParameter {
                name: "alpha2",
                reason: format!("{} is not a positive finite weight", self.alpha2),
            });
        }
        Ok(())
    }

    /// `S(p,ℓ,p-1)²` without boundary restriction.
    pub fn space(&self) -> Result<TensorSpace> {
        self.validate()?;
        let s = make_space(self.degree, self.level, self.degree as i32 - 1)?;
        Ok(TensorSpace::square(s, false))
    }
}

/// Assembled forward system with its parts kept for diagnostics.
#[derive(Clone, Debug)]
pub struct ForwardSystem {
    pub space: TensorSpace,
    pub laplace: SparseMatrix,
    pub boundary: SparseMatrix,
    pub system: SparseSymmetricSystem,
}

pub fn assemble_forward(cfg: &ForwardConfig, f: &dyn Field, g: &dyn Field) -> Result<ForwardSystem> {
    let space = cfg.space()?;
    let laplace = laplace_gramian_2d(&space, &space)?;
    let boundary = boundary_mass(&space, &space)?;
    let matrix = SparseMatrix::linear_combination(&[(1.0, &laplace), (cfg.alpha2, &boundary)]);
    let points = space.max_degree() + 2;
    let rf = load_vector_dd(&space, &|x, y| f.value(x, y), LoadAction::NegLaplaceTest, points)?;
    let rg = load_vector_dd(&space, &|x, y| g.value(x, y), LoadAction::BoundaryTrace, points)?;
    let rhs = rf.iter().zip(&rg).map(|(&a, &b)| a + b * cfg.alpha2).collect();
    let system = SparseSymmetricSystem::with_rhs_dd(&matrix, rhs)?;
    Ok(ForwardSystem {
        space,
        laplace,
        boundary,
        system,
    })
}

#[derive(Clone, Debug)]
pub struct ForwardSolution {
    pub space: TensorSpace,
    pub coeffs: Vec<f64>,
    pub report: SolveReport,
}

pub fn solve_forward(cfg: &ForwardConfig, f: &dyn Field, g: &dyn Field, opts: &SolveOptions) -> Result<ForwardSolution> {
    let assembled = assemble_forward(cfg, f, g)?;
    let (coeffs, report) = factor_and_solve(&assembled.system, opts)?;
    Ok(ForwardSolution {
        space: assembled.space,
        coeffs,
        report,
    })
}

/// `‖-Δu_h - f‖²_Ω + α² ‖u_h - g‖²_∂Ω` by direct quadrature.
pub fn forward_loss(cfg: &ForwardConfig, space: &TensorSpace, coeffs: &[f64], f: &dyn Field, g: &dyn Field) -> Result<f64> {
    let points = space.max_degree() + 3;
    let interior = space.integrate_fields(&[(space, coeffs)], Rect::unit(), points, |x, y, u| {
        let r = -u[0].laplacian() - f.value(x, y);
        r * r
    })?;
    let boundary = space.integrate_boundary(coeffs, points, |x, y, u| {
        let r = u - g.value(x, y);
        r * r
    })?;
    Ok(interior + cfg.alpha2 * boundary)
}

/// The data-only constant `‖f‖²_Ω + α² ‖g‖²_∂Ω` of the loss expansion
/// `L(u) = uᵀAu - 2uᵀb + c`.
pub fn forward_loss_constant(cfg: &ForwardConfig, space: &TensorSpace, f: &dyn Field, g: &dyn Field) -> Result<f64> {
    let points = space.max_degree() + 3;
    let interior = space.integrate(Rect::unit(), points, |x, y| f.value(x, y).powi(2))?;
    let zero = vec![0.0; space.dim()];
    let boundary = space.integrate_boundary(&zero, points, |x, y, _| g.value(x, y).powi(2))?;
    Ok(interior + cfg.alpha2 * boundary)
}

/// One cell of a parameter study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyCell<C> {
    pub config: C,
    /// Absolute errors of the computed state.
    pub errors: ErrorReport,
    /// Norms of the exact state on the same quadrature.
    pub reference: ErrorReport,
    pub solve: SolveReport,
    pub wall_time_s: f64,
}

impl<C> StudyCell<C> {
    pub fn relative(&self) -> ErrorReport {
        self.errors.relative_to(&self.reference)
    }
}

pub fn run_forward(cfg: &ForwardConfig, case: &ManufacturedCase, opts: &SolveOptions) -> Result<StudyCell<ForwardConfig>> {
    let start = Instant::now();
    let sol = solve_forward(cfg, case.f(), case.g(), opts)?;
    let errors = field_error(&sol.coeffs, &sol.space, case.u())?;
    let reference = field_norms(&sol.space, case.u())?;
    Ok(StudyCell {
        config: *cfg,
        errors,
        reference,
        solve: sol.report,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Solves the cosine manufactured problem for every `(ℓ, α²)` pair. Cells run
/// in parallel; the result is ordered by level, then by the order of `alpha2s`.
pub fn forward_convergence_study(
    degree: usize,
    k: u32,
    levels: &[u32],
    alpha2s: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<StudyCell<ForwardConfig>>> {
    if levels.is_empty() || alpha2s.is_empty() {
        return Err(Error::InvalidParameter {
            name: "levels/alpha2",
            reason: "parameter lists must be nonempty".into(),
        });
    }
    let case = example1_case(k)?;
    let configs: Vec<ForwardConfig> = levels
        .iter()
        .flat_map(|&level| {
            alpha2s.iter().map(move |&alpha2| ForwardConfig {
                degree,
                level,
                alpha2,
                k,
            })
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    configs.par_iter().map(|c| run_forward(c, &case, opts)).collect()
}
