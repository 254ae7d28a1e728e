//! Gramian and load-vector assembly.
//!
//! Every 2D bilinear form used by the forward and inverse problems separates
//! into sums of Kronecker products of 1D derivative Gramians
//! `G^(a,b)_ij = ∫ D^a B_i^test · D^b B_j^trial`, which are computed exactly
//! by per-element Gauss quadrature. Load vectors involve non-polynomial data
//! and are integrated element by element in 2D.

use std::ops::Range;

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::quadrature::gauss_rule;
use crate::sparse::SparseMatrix;
use crate::spline::SplineSpace;
use crate::tensor::{element_range, Rect, TensorSpace};

/// Sparse matrix of integrated basis-derivative products between a test
/// space (rows) and a trial space (columns).
pub type Gramian = SparseMatrix;

/// `∫_lo^hi D^a B_i^test · D^b B_j^trial dx` with `max(p_test, p_trial) + 1`
/// Gauss points per element.
pub fn gramian_1d(test: &SplineSpace, trial: &SplineSpace, a: usize, b: usize, lo: f64, hi: f64) -> Result<Gramian> {
    gramian_1d_with_points(test, trial, a, b, lo, hi, test.degree().max(trial.degree()) + 1)
}

/// [`gramian_1d`] with an explicit number of Gauss points per cell.
pub fn gramian_1d_with_points(
    test: &SplineSpace,
    trial: &SplineSpace,
    a: usize,
    b: usize,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<Gramian> {
    if a > test.degree() {
        return Err(Error::DerivativeOrder {
            order: a,
            degree: test.degree(),
        });
    }
    if b > trial.degree() {
        return Err(Error::DerivativeOrder {
            order: b,
            degree: trial.degree(),
        });
    }
    let aligned = |x: f64| test.is_breakpoint(x) && trial.is_breakpoint(x);
    if !(lo < hi) || !aligned(lo) || !aligned(hi) {
        return Err(Error::MisalignedInterval { lo, hi });
    }
    // integration cells: the common refinement of both meshes
    let mut cuts: Vec<f64> = test
        .breakpoints()
        .iter()
        .chain(trial.breakpoints())
        .copied()
        .filter(|&x| x >= lo - 1e-14 && x <= hi + 1e-14)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14);

    let rule = gauss_rule(points)?;
    let mut triplets = Vec::new();
    for cell in cuts.windows(2) {
        let (c0, c1) = (cell[0], cell[1]);
        let mid = 0.5 * (c0 + c1);
        let et = test.element_of(mid)?;
        let ef = trial.element_of(mid)?;
        let mut local = vec![Dd::ZERO; (test.degree() + 1) * (trial.degree() + 1)];
        let (mut ft, mut ff) = (0, 0);
        for (x, w) in rule.mapped(c0, c1) {
            let bt = test.eval_in_element(et, x, a);
            let bf = trial.eval_in_element(ef, x, b);
            ft = bt.first;
            ff = bf.first;
            for (i, vi) in bt.values[a].iter().enumerate() {
                for (j, vj) in bf.values[b].iter().enumerate() {
                    local[i * (trial.degree() + 1) + j] += Dd::prod(*vi, *vj) * w;
                }
            }
        }
        for i in 0..=test.degree() {
            for j in 0..=trial.degree() {
                triplets.push((ft + i, ff + j, local[i * (trial.degree() + 1) + j]));
            }
        }
    }
    Ok(SparseMatrix::from_triplets_dd(test.dim(), trial.dim(), triplets))
}

/// 1D mass matrix over [0, 1] restricted to the kept indices.
pub(crate) fn mass_1d(space: &SplineSpace, kept: Range<usize>) -> Result<Gramian> {
    let g = gramian_1d(space, space, 0, 0, 0.0, 1.0)?;
    let idx: Vec<usize> = kept.collect();
    Ok(g.select(&idx, &idx))
}

/// One Kronecker term `coef · G_x^(ax,bx) ⊗ G_y^(ay,by)` of a 2D form.
#[derive(Clone, Copy, Debug)]
struct Term {
    coef: f64,
    x: (usize, usize),
    y: (usize, usize),
}

fn restricted_1d(
    test: &SplineSpace,
    test_kept: Range<usize>,
    trial: &SplineSpace,
    trial_kept: Range<usize>,
    orders: (usize, usize),
    interval: (f64, f64),
) -> Result<Gramian> {
    let g = gramian_1d(test, trial, orders.0, orders.1, interval.0, interval.1)?;
    let rows: Vec<usize> = test_kept.collect();
    let cols: Vec<usize> = trial_kept.collect();
    Ok(g.select(&rows, &cols))
}

fn form_2d(test: &TensorSpace, trial: &TensorSpace, terms: &[Term], region: Rect) -> Result<Gramian> {
    let mut parts = Vec::with_capacity(terms.len());
    for t in terms {
        let gx = restricted_1d(test.x(), test.kept_x(), trial.x(), trial.kept_x(), t.x, (region.x0, region.x1))?;
        let gy = restricted_1d(test.y(), test.kept_y(), trial.y(), trial.kept_y(), t.y, (region.y0, region.y1))?;
        parts.push((t.coef, SparseMatrix::kron(&gx, &gy)));
    }
    let refs: Vec<(f64, &SparseMatrix)> = parts.iter().map(|(c, m)| (*c, m)).collect();
    Ok(SparseMatrix::linear_combination(&refs))
}

/// Mass matrix `(u, v)_Ω`.
pub fn mass_2d(test: &TensorSpace, trial: &TensorSpace) -> Result<Gramian> {
    form_2d(test, trial, &[Term { coef: 1.0, x: (0, 0), y: (0, 0) }], Rect::unit())
}

/// `(Δu, Δv)_Ω` for `v` in `test` and `u` in `trial`.
pub fn laplace_gramian_2d(test: &TensorSpace, trial: &TensorSpace) -> Result<Gramian> {
    let terms = [
        Term { coef: 1.0, x: (2, 2), y: (0, 0) },
        Term { coef: 1.0, x: (0, 0), y: (2, 2) },
        Term { coef: 1.0, x: (2, 0), y: (0, 2) },
        Term { coef: 1.0, x: (0, 2), y: (2, 0) },
    ];
    form_2d(test, trial, &terms, Rect::unit())
}

/// `(f, Δv)_Ω` for `v` in the state space `test` and `f` in the control space `trial`.
pub fn cross_laplace_gramian(test: &TensorSpace, trial: &TensorSpace) -> Result<Gramian> {
    let terms = [
        Term { coef: 1.0, x: (2, 0), y: (0, 0) },
        Term { coef: 1.0, x: (0, 0), y: (2, 0) },
    ];
    form_2d(test, trial, &terms, Rect::unit())
}

/// `(Δu, g)_Ω` for `g` in `test` and `u` in `trial`: the transpose layout of
/// [`cross_laplace_gramian`].
pub fn laplace_trial_gramian(test: &TensorSpace, trial: &TensorSpace) -> Result<Gramian> {
    let terms = [
        Term { coef: 1.0, x: (0, 2), y: (0, 0) },
        Term { coef: 1.0, x: (0, 0), y: (0, 2) },
    ];
    form_2d(test, trial, &terms, Rect::unit())
}

/// `(u, v)_Γ` for an axis-aligned rectangle Γ whose edges lie on knot lines.
pub fn subdomain_mass(test: &TensorSpace, trial: &TensorSpace, gamma: Rect) -> Result<Gramian> {
    for v in [gamma.x0, gamma.x1] {
        if !(test.x().is_breakpoint(v) && trial.x().is_breakpoint(v)) {
            return Err(Error::MisalignedSubdomain { value: v });
        }
    }
    for v in [gamma.y0, gamma.y1] {
        if !(test.y().is_breakpoint(v) && trial.y().is_breakpoint(v)) {
            return Err(Error::MisalignedSubdomain { value: v });
        }
    }
    form_2d(test, trial, &[Term { coef: 1.0, x: (0, 0), y: (0, 0) }], gamma)
}

/// Kept basis values at an endpoint, as a sparse column vector.
fn trace_vector(space: &TensorSpace, s: &SplineSpace, at: f64) -> Result<SparseMatrix> {
    let kept = space.kept(s);
    let b = s.eval_basis(at, 0)?;
    let triplets = b
        .values
        .iter()
        .enumerate()
        .filter(|(j, v)| **v != 0.0 && kept.contains(&(b.first + j)))
        .map(|(j, &v)| (b.first + j - kept.start, 0, v))
        .collect();
    Ok(SparseMatrix::from_triplets(kept.len(), 1, triplets))
}

/// `(u, v)_∂Ω`: the sum of the four edge trace products.
pub fn boundary_mass(test: &TensorSpace, trial: &TensorSpace) -> Result<Gramian> {
    let gx = restricted_1d(test.x(), test.kept_x(), trial.x(), trial.kept_x(), (0, 0), (0.0, 1.0))?;
    let gy = restricted_1d(test.y(), test.kept_y(), trial.y(), trial.kept_y(), (0, 0), (0.0, 1.0))?;
    let mut parts = Vec::with_capacity(4);
    for at in [0.0, 1.0] {
        // horizontal edges y = at
        let tv = trace_vector(test, test.y(), at)?;
        let uv = trace_vector(trial, trial.y(), at)?;
        parts.push(SparseMatrix::kron(&gx, &outer(&tv, &uv)));
        // vertical edges x = at
        let tv = trace_vector(test, test.x(), at)?;
        let uv = trace_vector(trial, trial.x(), at)?;
        parts.push(SparseMatrix::kron(&outer(&tv, &uv), &gy));
    }
    let refs: Vec<(f64, &SparseMatrix)> = parts.iter().map(|m| (1.0, m)).collect();
    Ok(SparseMatrix::linear_combination(&refs))
}

fn outer(a: &SparseMatrix, b: &SparseMatrix) -> SparseMatrix {
    SparseMatrix::kron(a, &b.transpose())
}

/// How a load vector pairs the data function with the test functions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LoadAction {
    /// `∫_Ω φ B_i`
    Domain,
    /// `∫_Ω φ (-ΔB_i)`
    NegLaplaceTest,
    /// `∮_∂Ω φ B_i`
    BoundaryTrace,
    /// `∫_Γ φ B_i`
    Subdomain(Rect),
}

/// Load vector with `p + 2` Gauss points per element and direction.
pub fn load_vector<F>(test: &TensorSpace, phi: &F, action: LoadAction) -> Result<Vec<f64>>
where
    F: Fn(f64, f64) -> f64 + ?Sized,
{
    load_vector_with_points(test, phi, action, test.max_degree() + 2)
}

/// [`load_vector`] with an explicit number of Gauss points.
pub fn load_vector_with_points<F>(test: &TensorSpace, phi: &F, action: LoadAction, points: usize) -> Result<Vec<f64>>
where
    F: Fn(f64, f64) -> f64 + ?Sized,
{
    Ok(load_vector_dd(test, phi, action, points)?.iter().map(|d| d.to_f64()).collect())
}

/// [`load_vector_with_points`] accumulated in double-double.
pub fn load_vector_dd<F>(test: &TensorSpace, phi: &F, action: LoadAction, points: usize) -> Result<Vec<Dd>>
where
    F: Fn(f64, f64) -> f64 + ?Sized,
{
    let rule = gauss_rule(points)?;
    let mut out = vec![Dd::ZERO; test.dim()];
    let (sx, sy) = (test.x(), test.y());
    match action {
        LoadAction::BoundaryTrace => {
            for at in [0.0, 1.0] {
                let by = sy.eval_basis(at, 0)?;
                for e in 0..sx.num_elements() {
                    let (a, b) = sx.element_bounds(e);
                    for (x, w) in rule.mapped(a, b) {
                        let bx = sx.eval_in_element(e, x, 0);
                        let f = w * phi(x, at);
                        scatter(test, &mut out, bx.first, &bx.values[0], by.first, &by.values, f);
                    }
                }
                let bx = sx.eval_basis(at, 0)?;
                for e in 0..sy.num_elements() {
                    let (a, b) = sy.element_bounds(e);
                    for (y, w) in rule.mapped(a, b) {
                        let by = sy.eval_in_element(e, y, 0);
                        let f = w * phi(at, y);
                        scatter(test, &mut out, bx.first, &bx.values, by.first, &by.values[0], f);
                    }
                }
            }
        }
        LoadAction::Domain | LoadAction::NegLaplaceTest | LoadAction::Subdomain(_) => {
            let region = match action {
                LoadAction::Subdomain(r) => r,
                _ => Rect::unit(),
            };
            let ex = element_range(sx, region.x0, region.x1)?;
            let ey = element_range(sy, region.y0, region.y1)?;
            let laplace = matches!(action, LoadAction::NegLaplaceTest);
            let order = if laplace { 2 } else { 0 };
            for ix in ex {
                let (xa, xb) = sx.element_bounds(ix);
                let xq: Vec<_> = rule
                    .mapped(xa, xb)
                    .map(|(x, w)| (x, w, sx.eval_in_element(ix, x, order)))
                    .collect();
                for iy in ey.clone() {
                    let (ya, yb) = sy.element_bounds(iy);
                    for (y, wy) in rule.mapped(ya, yb) {
                        let by = sy.eval_in_element(iy, y, order);
                        for (x, wx, bx) in &xq {
                            let f = wx * wy * phi(*x, y);
                            if laplace {
                                // -Δ(X Y) = -(X'' Y + X Y'')
                                scatter(test, &mut out, bx.first, &bx.values[2], by.first, &by.values[0], -f);
                                scatter(test, &mut out, bx.first, &bx.values[0], by.first, &by.values[2], -f);
                            } else {
                                scatter(test, &mut out, bx.first, &bx.values[0], by.first, &by.values[0], f);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn scatter(space: &TensorSpace, out: &mut [Dd], fx: usize, vx: &[f64], fy: usize, vy: &[f64], scale: f64) {
    for (a, &x) in vx.iter().enumerate() {
        for (b, &y) in vy.iter().enumerate() {
            if let Some(k) = space.dof(fx + a, fy + b) {
                out[k] += Dd::prod(x, y) * scale;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Field, Polynomial};
    use crate::spline::make_space;
    use approx::assert_abs_diff_eq;

    #[test]
    fn linear_element_mass() {
        let s = make_space(1, 0, 0).unwrap();
        let g = gramian_1d(&s, &s, 0, 0, 0.0, 1.0).unwrap().to_dense();
        assert_abs_diff_eq!(g[(0, 0)], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[(0, 1)], 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[(1, 1)], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn mass_row_sums_are_basis_integrals() {
        let s = make_space(2, 3, 1).unwrap();
        let g = gramian_1d(&s, &s, 0, 0, 0.0, 1.0).unwrap();
        let sums = g.matvec(&vec![1.0; s.dim()]);
        let rule = gauss_rule(3).unwrap();
        for (i, sum) in sums.iter().enumerate() {
            let integral: f64 = s
                .support_elements(i)
                .map(|e| {
                    let (a, b) = s.element_bounds(e);
                    rule.integrate(a, b, |x| {
                        let v = s.eval_in_element(e, x, 0);
                        v.values[0][i - v.first]
                    })
                })
                .sum();
            assert_abs_diff_eq!(*sum, integral, epsilon = 1e-14);
        }
    }

    #[test]
    fn misaligned_interval_and_orders() {
        let s = make_space(2, 2, 1).unwrap();
        assert!(matches!(gramian_1d(&s, &s, 0, 0, 0.1, 1.0), Err(Error::MisalignedInterval { .. })));
        assert!(matches!(gramian_1d(&s, &s, 0, 0, 0.5, 0.5), Err(Error::MisalignedInterval { .. })));
        assert!(matches!(gramian_1d(&s, &s, 3, 0, 0.0, 1.0), Err(Error::DerivativeOrder { .. })));
        let coarse = make_space(2, 1, 1).unwrap();
        assert!(gramian_1d(&s, &coarse, 0, 0, 0.25, 1.0).is_err());
        assert!(gramian_1d(&s, &coarse, 0, 0, 0.5, 1.0).is_ok());
    }

    #[test]
    fn transposed_orders_between_spaces() {
        let u = make_space(2, 3, 1).unwrap();
        let f = make_space(2, 3, -1).unwrap();
        let g20 = gramian_1d(&u, &f, 2, 0, 0.0, 1.0).unwrap();
        let g02 = gramian_1d(&f, &u, 0, 2, 0.0, 1.0).unwrap();
        let gt = g02.transpose();
        for (i, j, v) in g20.iter() {
            assert!((v - gt.get(i, j)).abs() <= 1e-14 * g20.max_abs());
        }
        assert_eq!(g20.nnz(), gt.nnz());
    }

    #[test]
    fn laplacian_of_paraboloid_and_constant() {
        let space = TensorSpace::square(make_space(2, 2, 1).unwrap(), false);
        let l = laplace_gramian_2d(&space, &space).unwrap();
        let u = space.interpolate(&Polynomial::paraboloid()).unwrap();
        assert_abs_diff_eq!(l.bilinear(&u, &u), 16.0, epsilon = 16.0 * 1e-12);
        let ones = vec![1.0; space.dim()];
        assert!(l.matvec(&ones).iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn boundary_mass_perimeter_and_dirichlet() {
        let s = make_space(2, 2, 1).unwrap();
        let full = TensorSpace::square(s.clone(), false);
        let b = boundary_mass(&full, &full).unwrap();
        let ones = vec![1.0; full.dim()];
        assert_abs_diff_eq!(b.bilinear(&ones, &ones), 4.0, epsilon = 1e-12);
        let dir = TensorSpace::square(s, true);
        let bd = boundary_mass(&dir, &dir).unwrap();
        assert_eq!(bd.max_abs(), 0.0);
    }

    #[test]
    fn subdomain_mass_area_and_full_domain() {
        let space = TensorSpace::square(make_space(2, 3, 1).unwrap(), false);
        let ones = vec![1.0; space.dim()];
        let mg = subdomain_mass(&space, &space, Rect::square(0.25, 0.75)).unwrap();
        assert_abs_diff_eq!(mg.bilinear(&ones, &ones), 0.25, epsilon = 1e-12);
        let full = subdomain_mass(&space, &space, Rect::unit()).unwrap();
        let m = mass_2d(&space, &space).unwrap();
        for (i, j, v) in m.iter() {
            assert!((v - full.get(i, j)).abs() <= 1e-14 * m.max_abs());
        }
        let coarse = TensorSpace::square(make_space(2, 1, 1).unwrap(), false);
        assert!(matches!(
            subdomain_mass(&coarse, &coarse, Rect::square(0.25, 0.75)),
            Err(Error::MisalignedSubdomain { .. })
        ));
    }

    #[test]
    fn cross_gramian_of_constant_control() {
        let u = TensorSpace::square(make_space(2, 2, 1).unwrap(), false);
        let f = TensorSpace::square(make_space(2, 2, -1).unwrap(), false);
        let c = cross_laplace_gramian(&u, &f).unwrap();
        let v = u.interpolate(&Polynomial::paraboloid()).unwrap();
        let one = f.l2_projection(&Polynomial::constant(1.0)).unwrap();
        assert_abs_diff_eq!(c.bilinear(&v, &one), -4.0, epsilon = 4.0 * 1e-12);
    }

    #[test]
    fn load_vectors_of_constants() {
        let space = TensorSpace::square(make_space(2, 3, 1).unwrap(), false);
        let one = |_: f64, _: f64| 1.0;
        let b = load_vector(&space, &one, LoadAction::Domain).unwrap();
        assert_abs_diff_eq!(b.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let t = load_vector(&space, &one, LoadAction::BoundaryTrace).unwrap();
        assert_abs_diff_eq!(t.iter().sum::<f64>(), 4.0, epsilon = 1e-12);
        let g = load_vector(&space, &one, LoadAction::Subdomain(Rect::square(0.25, 0.75))).unwrap();
        assert_abs_diff_eq!(g.iter().sum::<f64>(), 0.25, epsilon = 1e-12);

        // Σ cᵢ (-ΔBᵢ, 1) = ∫ -Δ(bubble) = 2/3
        let dir = TensorSpace::square(make_space(2, 3, 1).unwrap(), true);
        let c = dir.interpolate(&Polynomial::bubble()).unwrap();
        let nl = load_vector(&dir, &one, LoadAction::NegLaplaceTest).unwrap();
        let total: f64 = c.iter().zip(&nl).map(|(a, b)| a * b).sum();
        assert_abs_diff_eq!(total, 2.0 / 3.0, epsilon = 1e-12);
        let bubble = Polynomial::bubble();
        assert_abs_diff_eq!(
            dir.integrate(Rect::unit(), 4, |x, y| -bubble.laplacian(x, y)).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-14
        );
    }
}
