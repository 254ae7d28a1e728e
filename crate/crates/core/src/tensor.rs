//! Tensor-product spline spaces on the unit square.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Derivs2, Field};
use crate::quadrature::gauss_rule;
use crate::spline::{BasisDerivatives, SplineSpace};

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn unit() -> Self {
        Self::square(0.0, 1.0)
    }

    pub fn square(lo: f64, hi: f64) -> Self {
        Self {
            x0: lo,
            x1: hi,
            y0: lo,
            y1: hi,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// `x_space ⊗ y_space`, optionally restricted to functions vanishing on the
/// boundary by dropping the first and last basis function in each direction.
///
/// Degrees of freedom are numbered x-major: `(ix, iy) ↦ ix * dim_y + iy`,
/// matching `kron(G_x, G_y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSpace {
    x: SplineSpace,
    y: SplineSpace,
    dirichlet: bool,
}

impl TensorSpace {
    pub fn new(x: SplineSpace, y: SplineSpace, dirichlet: bool) -> Self {
        Self { x, y, dirichlet }
    }

    /// Same 1D space in both directions.
    pub fn square(space: SplineSpace, dirichlet: bool) -> Self {
        Self::new(space.clone(), space, dirichlet)
    }

    pub fn x(&self) -> &SplineSpace {
        &self.x
    }

    pub fn y(&self) -> &SplineSpace {
        &self.y
    }

    pub fn dirichlet(&self) -> bool {
        self.dirichlet
    }

    /// Kept 1D indices along an axis.
    pub fn kept(&self, space: &SplineSpace) -> Range<usize> {
        if self.dirichlet {
            1..space.dim() - 1
        } else {
            0..space.dim()
        }
    }

    pub fn kept_x(&self) -> Range<usize> {
        self.kept(&self.x)
    }

    pub fn kept_y(&self) -> Range<usize> {
        self.kept(&self.y)
    }

    pub fn dim_x(&self) -> usize {
        self.kept_x().len()
    }

    pub fn dim_y(&self) -> usize {
        self.kept_y().len()
    }

    pub fn dim(&self) -> usize {
        self.dim_x() * self.dim_y()
    }

    /// Degree of freedom of the product of 1D functions `ix` and `iy`
    /// (unrestricted numbering), if it is kept.
    pub fn dof(&self, ix: usize, iy: usize) -> Option<usize> {
        let (kx, ky) = (self.kept_x(), self.kept_y());
        (kx.contains(&ix) && ky.contains(&iy)).then(|| (ix - kx.start) * ky.len() + (iy - ky.start))
    }

    /// Largest degree of the two directions.
    pub fn max_degree(&self) -> usize {
        self.x.degree().max(self.y.degree())
    }

    /// Value and derivatives of the function with coefficients `coeffs` at `(x, y)`.
    pub fn evaluate(&self, coeffs: &[f64], x: f64, y: f64) -> Result<Derivs2> {
        self.check_len(coeffs)?;
        let bx = self.x.eval_derivatives(x, 2)?;
        let by = self.y.eval_derivatives(y, 2)?;
        Ok(self.combine(coeffs, &bx, &by))
    }

    pub(crate) fn check_len(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "coefficient vector",
                expected: self.dim(),
                got: coeffs.len(),
            });
        }
        Ok(())
    }

    /// Sums `coeffs` against products of the 1D derivative tables (orders 0..=2).
    pub(crate) fn combine(&self, coeffs: &[f64], bx: &BasisDerivatives, by: &BasisDerivatives) -> Derivs2 {
        let mut out = Derivs2::default();
        for (a, _) in bx.values[0].iter().enumerate() {
            for (b, _) in by.values[0].iter().enumerate() {
                let Some(k) = self.dof(bx.first + a, by.first + b) else {
                    continue;
                };
                let c = coeffs[k];
                let (x0, x1, x2) = (bx.values[0][a], bx.values[1][a], bx.values[2][a]);
                let (y0, y1, y2) = (by.values[0][b], by.values[1][b], by.values[2][b]);
                out.value += c * x0 * y0;
                out.dx += c * x1 * y0;
                out.dy += c * x0 * y1;
                out.dxx += c * x2 * y0;
                out.dxy += c * x1 * y1;
                out.dyy += c * x0 * y2;
            }
        }
        out
    }

    /// Greville collocation of `f`. Reproduces every member of the space;
    /// requires continuity ≥ 0 so that the Greville points are distinct.
    pub fn interpolate(&self, f: &dyn Field) -> Result<Vec<f64>> {
        let full = TensorSpace::new(self.x.clone(), self.y.clone(), false);
        let ax = collocation_matrix(&self.x)?;
        let ay = collocation_matrix(&self.y)?;
        let gx = self.x.greville();
        let gy = self.y.greville();
        let values = DMatrix::from_fn(gx.len(), gy.len(), |i, j| f.value(gx[i], gy[j]));
        let ax = ax.lu();
        let ay = ay.lu();
        let tmp = ax.solve(&values).ok_or_else(singular)?;
        let coeffs = ay.solve(&tmp.transpose()).ok_or_else(singular)?.transpose();
        let mut out = vec![0.0; self.dim()];
        for ix in 0..full.dim_x() {
            for iy in 0..full.dim_y() {
                if let Some(k) = self.dof(ix, iy) {
                    out[k] = coeffs[(ix, iy)];
                }
            }
        }
        Ok(out)
    }

    /// L² projection of `f` onto the space.
    pub fn l2_projection(&self, f: &dyn Field) -> Result<Vec<f64>> {
        let rhs = crate::assembly::load_vector(self, &|x, y| f.value(x, y), crate::assembly::LoadAction::Domain)?;
        let mx = crate::assembly::mass_1d(&self.x, self.kept_x())?.to_dense();
        let my = crate::assembly::mass_1d(&self.y, self.kept_y())?.to_dense();
        let b = DMatrix::from_row_slice(self.dim_x(), self.dim_y(), &rhs);
        let cx = mx.cholesky().ok_or_else(singular)?;
        let cy = my.cholesky().ok_or_else(singular)?;
        let tmp = cx.solve(&b);
        let x = cy.solve(&tmp.transpose()).transpose();
        Ok((0..self.dim_x())
            .flat_map(|i| (0..self.dim_y()).map(move |j| (i, j)))
            .map(|(i, j)| x[(i, j)])
            .collect())
    }

    /// Calls `visit(x, y, weight, fields)` at every Gauss point of `region`
    /// (`points` per element and direction), where `fields[k]` holds the
    /// derivatives of the k-th discrete field. All spaces must share the mesh
    /// of `self`.
    pub fn visit_points<F>(
        &self,
        fields: &[(&TensorSpace, &[f64])],
        region: Rect,
        points: usize,
        mut visit: F,
    ) -> Result<()>
    where
        F: FnMut(f64, f64, f64, &[Derivs2]),
    {
        for (space, coeffs) in fields {
            space.check_len(coeffs)?;
        }
        let rule = gauss_rule(points)?;
        let ex = element_range(&self.x, region.x0, region.x1)?;
        let ey = element_range(&self.y, region.y0, region.y1)?;
        let mut values = vec![Derivs2::default(); fields.len()];
        for ix in ex {
            let (xa, xb) = self.x.element_bounds(ix);
            let xq: Vec<(f64, f64)> = rule.mapped(xa, xb).collect();
            let xtabs: Vec<Vec<BasisDerivatives>> = fields
                .iter()
                .map(|(s, _)| xq.iter().map(|&(x, _)| s.x.eval_in_element(ix, x, 2)).collect())
                .collect();
            for iy in ey.clone() {
                let (ya, yb) = self.y.element_bounds(iy);
                let yq: Vec<(f64, f64)> = rule.mapped(ya, yb).collect();
                let ytabs: Vec<Vec<BasisDerivatives>> = fields
                    .iter()
                    .map(|(s, _)| yq.iter().map(|&(y, _)| s.y.eval_in_element(iy, y, 2)).collect())
                    .collect();
                for (qx, &(x, wx)) in xq.iter().enumerate() {
                    for (qy, &(y, wy)) in yq.iter().enumerate() {
                        for (k, (s, c)) in fields.iter().enumerate() {
                            values[k] = s.combine(c, &xtabs[k][qx], &ytabs[k][qy]);
                        }
                        visit(x, y, wx * wy, &values);
                    }
                }
            }
        }
        Ok(())
    }

    /// Integrates `integrand(x, y, fields)` over `region`; see [`visit_points`](Self::visit_points).
    pub fn integrate_fields<F>(
        &self,
        fields: &[(&TensorSpace, &[f64])],
        region: Rect,
        points: usize,
        mut integrand: F,
    ) -> Result<f64>
    where
        F: FnMut(f64, f64, &[Derivs2]) -> f64,
    {
        let mut total = 0.0;
        self.visit_points(fields, region, points, |x, y, w, v| total += w * integrand(x, y, v))?;
        Ok(total)
    }

    /// Integrates `integrand(x, y)` over `region` using the element grid of `self`.
    pub fn integrate<F>(&self, region: Rect, points: usize, mut integrand: F) -> Result<f64>
    where
        F: FnMut(f64, f64) -> f64,
    {
        self.integrate_fields(&[], region, points, |x, y, _| integrand(x, y))
    }

    /// Integrates `integrand(x, y, value)` along the four edges of the unit square.
    pub fn integrate_boundary<F>(&self, coeffs: &[f64], points: usize, mut integrand: F) -> Result<f64>
    where
        F: FnMut(f64, f64, f64) -> f64,
    {
        self.check_len(coeffs)?;
        let rule = gauss_rule(points)?;
        let mut total = 0.0;
        for (along_x, fixed) in [(true, 0.0), (true, 1.0), (false, 0.0), (false, 1.0)] {
            let space = if along_x { &self.x } else { &self.y };
            for e in 0..space.num_elements() {
                let (a, b) = space.element_bounds(e);
                for (t, w) in rule.mapped(a, b) {
                    let (x, y) = if along_x { (t, fixed) } else { (fixed, t) };
                    let u = self.evaluate(coeffs, x, y)?.value;
                    total += w * integrand(x, y, u);
                }
            }
        }
        Ok(total)
    }
}

fn singular() -> Error {
    Error::DegenerateInput("singular interpolation or mass matrix".into())
}

fn collocation_matrix(space: &SplineSpace) -> Result<DMatrix<f64>> {
    if space.continuity() < 0 {
        return Err(Error::DegenerateInput(
            "Greville collocation needs continuity >= 0".into(),
        ));
    }
    let g = space.greville();
    let mut a = DMatrix::zeros(g.len(), g.len());
    for (i, &x) in g.iter().enumerate() {
        let b = space.eval_basis(x, 0)?;
        for (j, v) in b.values.iter().enumerate() {
            a[(i, b.first + j)] = *v;
        }
    }
    Ok(a)
}

/// Elements covering `[lo, hi]`, which must both be breakpoints.
pub(crate) fn element_range(space: &SplineSpace, lo: f64, hi: f64) -> Result<Range<usize>> {
    let a = space
        .breakpoint_index(lo)
        .ok_or(Error::MisalignedSubdomain { value: lo })?;
    let b = space
        .breakpoint_index(hi)
        .ok_or(Error::MisalignedSubdomain { value: hi })?;
    if a >= b {
        return Err(Error::InvalidParameter {
            name: "rectangle",
            reason: format!("empty range [{lo}, {hi}]"),
        });
    }
    Ok(a..b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Polynomial;
    use crate::spline::make_space;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dims_and_dofs() {
        let s = make_space(2, 2, 1).unwrap();
        let full = TensorSpace::square(s.clone(), false);
        let dir = TensorSpace::square(s, true);
        assert_eq!(full.dim(), 36);
        assert_eq!(dir.dim(), 16);
        assert_eq!(dir.dof(0, 3), None);
        assert_eq!(dir.dof(1, 1), Some(0));
        assert_eq!(dir.dof(2, 1), Some(4));
        assert_eq!(full.dof(2, 1), Some(13));
    }

    #[test]
    fn greville_interpolation_reproduces_quadratics() {
        let space = TensorSpace::square(make_space(2, 3, 1).unwrap(), false);
        let p = Polynomial::paraboloid();
        let c = space.interpolate(&p).unwrap();
        for &(x, y) in &[(0.1, 0.9), (0.5, 0.33), (1.0, 0.0)] {
            let d = space.evaluate(&c, x, y).unwrap();
            assert_abs_diff_eq!(d.value, p.value(x, y), epsilon = 1e-12);
            assert_abs_diff_eq!(d.laplacian(), -4.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn dirichlet_space_vanishes_on_boundary() {
        let space = TensorSpace::square(make_space(3, 2, 2).unwrap(), true);
        let coeffs: Vec<f64> = (0..space.dim()).map(|i| (i as f64 * 0.7).sin()).collect();
        for &(x, y) in &[(0.0, 0.3), (1.0, 0.61), (0.2, 0.0), (0.77, 1.0)] {
            assert!(space.evaluate(&coeffs, x, y).unwrap().value.abs() <= 1e-13);
        }
    }

    #[test]
    fn projection_of_discontinuous_member() {
        // bubble source is a biquadratic, hence in the discontinuous quadratic space
        let space = TensorSpace::square(make_space(2, 2, -1).unwrap(), false);
        let f = Polynomial::bubble_source();
        let c = space.l2_projection(&f).unwrap();
        let d = space.evaluate(&c, 0.3, 0.71).unwrap();
        assert_abs_diff_eq!(d.value, f.value(0.3, 0.71), epsilon = 1e-12);
        assert!(space.interpolate(&f).is_err());
    }

    #[test]
    fn misaligned_region() {
        let s = make_space(2, 1, 1).unwrap();
        assert!(matches!(element_range(&s, 0.25, 0.75), Err(Error::MisalignedSubdomain { .. })));
        assert_eq!(element_range(&make_space(2, 2, 1).unwrap(), 0.25, 0.75).unwrap(), 1..3);
    }
}
