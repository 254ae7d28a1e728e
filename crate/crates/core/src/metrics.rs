//! Sobolev-norm errors of discrete fields against exact fields.
//!
//! Reported tables use relative errors: each component divided by the same
//! norm of the exact field, with the Hessian measured in the Frobenius norm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::tensor::{Rect, TensorSpace};

/// How the mixed derivative enters the second-derivative seminorm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixedDerivative {
    /// `|e|²_{H²} = ‖e_xx‖² + ‖e_xy‖² + ‖e_yy‖²` (multi-index convention).
    Once,
    /// `|e|²_{H²} = ‖e_xx‖² + 2‖e_xy‖² + ‖e_yy‖²` (Frobenius norm of the Hessian).
    #[default]
    Twice,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub l2: f64,
    pub h1_semi: f64,
    pub h2_semi: f64,
    /// `sqrt(l2² + h1_semi² + h2_semi²)`
    pub h2_full: f64,
    pub dof: usize,
}

impl ErrorReport {
    /// Componentwise ratio to the norms of a reference field (zero components
    /// of the reference leave the error unscaled).
    pub fn relative_to(&self, reference: &ErrorReport) -> ErrorReport {
        let div = |e: f64, r: f64| if r > 0.0 { e / r } else { e };
        ErrorReport {
            l2: div(self.l2, reference.l2),
            h1_semi: div(self.h1_semi, reference.h1_semi),
            h2_semi: div(self.h2_semi, reference.h2_semi),
            h2_full: div(self.h2_full, reference.h2_full),
            dof: self.dof,
        }
    }

    fn from_squares(l2: f64, h1: f64, h2: f64, dof: usize) -> Self {
        Self {
            l2: l2.sqrt(),
            h1_semi: h1.sqrt(),
            h2_semi: h2.sqrt(),
            h2_full: (l2 + h1 + h2).sqrt(),
            dof,
        }
    }
}

/// Errors of `coeffs` on `space` against `exact`, with `p + 3` Gauss points
/// per element and direction.
pub fn field_error(coeffs: &[f64], space: &TensorSpace, exact: &dyn Field) -> Result<ErrorReport> {
    field_error_with(coeffs, space, exact, space.max_degree() + 3, MixedDerivative::default())
}

/// Norms of `exact` on the quadrature used by [`field_error`] (the error of
/// the zero function).
pub fn field_norms(space: &TensorSpace, exact: &dyn Field) -> Result<ErrorReport> {
    field_error(&vec![0.0; space.dim()], space, exact)
}

pub fn field_error_with(
    coeffs: &[f64],
    space: &TensorSpace,
    exact: &dyn Field,
    points: usize,
    mixed: MixedDerivative,
) -> Result<ErrorReport> {
    let w_mixed = match mixed {
        MixedDerivative::Once => 1.0,
        MixedDerivative::Twice => 2.0,
    };
    let mut sums = [0.0f64; 3];
    space.visit_points(&[(space, coeffs)], Rect::unit(), points, |x, y, w, uh| {
        let e = exact.derivs(x, y) - uh[0];
        sums[0] += w * e.value * e.value;
        sums[1] += w * (e.dx * e.dx + e.dy * e.dy);
        sums[2] += w * (e.dxx * e.dxx + w_mixed * e.dxy * e.dxy + e.dyy * e.dyy);
    })?;
    Ok(ErrorReport::from_squares(sums[0], sums[1], sums[2], space.dim()))
}

/// `log₂(e_ℓ / e_{ℓ+1})` for consecutive refinement levels.
pub fn observed_rates(errors: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = errors.iter().find(|&&e| !(e > 0.0)) {
        return Err(Error::DegenerateInput(format!("error {bad} is not positive")));
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Polynomial, Trig, TrigProduct};
    use crate::spline::make_space;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn rates_of_halving_errors() {
        assert_eq!(observed_rates(&[8.0, 4.0, 2.0]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(observed_rates(&[1.0, 1.0]).unwrap(), vec![0.0]);
        assert!(matches!(observed_rates(&[1.0, 0.0]), Err(Error::DegenerateInput(_))));
        let r = observed_rates(&[7.86e-2, 3.91e-2, 1.95e-2, 9.76e-3]).unwrap();
        for (got, want) in r.iter().zip([1.007, 1.004, 0.999]) {
            assert!((got - want).abs() < 1e-3, "{got} vs {want}");
        }
    }

    #[test]
    fn interpolated_polynomial_has_no_error() {
        let space = TensorSpace::square(make_space(3, 2, 2).unwrap(), false);
        let u = Polynomial::new(vec![vec![0.5, -1.0, 0.0, 2.0], vec![1.0, 0.25, -3.0], vec![0.0, 1.5], vec![-0.75]]);
        let c = space.interpolate(&u).unwrap();
        let e = field_error(&c, &space, &u).unwrap();
        for v in [e.l2, e.h1_semi, e.h2_semi, e.h2_full] {
            assert!(v <= 1e-11, "{e:?}");
        }
    }

    #[test]
    fn norms_of_cosine_product() {
        let space = TensorSpace::square(make_space(2, 3, 1).unwrap(), false);
        let u = TrigProduct {
            kind: Trig::Cos,
            wavenumber: 1.0,
            amplitude: 1.0,
        };
        let n = field_norms(&space, &u).unwrap();
        let pi2 = PI * PI;
        assert_relative_eq!(n.l2, 0.5, max_relative = 1e-12);
        assert_relative_eq!(n.h1_semi, (pi2 / 2.0).sqrt(), max_relative = 1e-12);
        // Frobenius Hessian: (1/4 + 2/4 + 1/4) π⁴
        assert_relative_eq!(n.h2_semi, pi2, max_relative = 1e-12);
        let once = field_error_with(&vec![0.0; space.dim()], &space, &u, 5, MixedDerivative::Once).unwrap();
        assert_relative_eq!(once.h2_semi, pi2 * (0.75f64).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(n.h2_full * n.h2_full, n.l2.powi(2) + n.h1_semi.powi(2) + n.h2_semi.powi(2), max_relative = 1e-14);
    }

    #[test]
    fn relative_errors_divide_componentwise() {
        let e = ErrorReport { l2: 1.0, h1_semi: 2.0, h2_semi: 3.0, h2_full: 4.0, dof: 7 };
        let r = ErrorReport { l2: 2.0, h1_semi: 4.0, h2_semi: 0.0, h2_full: 8.0, dof: 0 };
        let q = e.relative_to(&r);
        assert_eq!((q.l2, q.h1_semi, q.h2_semi, q.h2_full, q.dof), (0.5, 0.5, 3.0, 0.5, 7));
    }
}
