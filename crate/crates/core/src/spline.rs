//! Uniform open B-spline spaces on [0, 1].
//!
//! A space `S(p, ℓ, q)` has degree `p`, `2^ℓ` equal elements and continuity
//! `C^q` at every interior breakpoint, realized by repeating each interior
//! breakpoint `p - q` times. The end knots are repeated `p + 1` times so the
//! first and last basis functions interpolate the endpoint values.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Open knot vector with uniform interior multiplicity.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotVector {
    degree: usize,
    breakpoints: Vec<f64>,
    multiplicities: Vec<usize>,
    knots: Vec<f64>,
}

impl KnotVector {
    /// Dyadic breakpoints `j / 2^level` with every interior breakpoint repeated
    /// `interior_multiplicity` times.
    pub fn open_uniform(degree: usize, level: u32, interior_multiplicity: usize) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidDegree { degree, min: 1 });
        }
        if interior_multiplicity == 0 || interior_multiplicity > degree + 1 {
            return Err(Error::InvalidContinuity {
                degree,
                continuity: degree as i32 - interior_multiplicity as i32,
            });
        }
        let n_el = 1usize << level;
        let breakpoints: Vec<f64> = (0..=n_el).map(|j| j as f64 / n_el as f64).collect();
        let multiplicities = vec![interior_multiplicity; n_el - 1];
        let mut knots = vec![0.0; degree + 1];
        for (&b, &m) in breakpoints[1..n_el].iter().zip(&multiplicities) {
            knots.extend(std::iter::repeat_n(b, m));
        }
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Ok(Self {
            degree,
            breakpoints,
            multiplicities,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Multiplicity of each interior breakpoint.
    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn num_elements(&self) -> usize {
        self.breakpoints.len() - 1
    }
}

/// Derivatives of the basis functions supported at a point: `values[d][j]` is
/// the `d`-th derivative of basis function `first + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisDerivatives {
    pub first: usize,
    pub values: Vec<Vec<f64>>,
}

/// Values of one derivative order of the basis functions supported at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisValues {
    pub first: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceParams {
    pub degree: usize,
    pub level: u32,
    pub continuity: i32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplineSpace {
    params: SpaceParams,
    knots: KnotVector,
    multiplicity: usize,
    dim: usize,
}

/// Builds `S(p, ℓ, q)` on [0, 1].
pub fn make_space(degree: usize, level: u32, continuity: i32) -> Result<SplineSpace> {
    if degree < 1 {
        return Err(Error::InvalidDegree { degree, min: 1 });
    }
    if continuity < -1 || continuity > degree as i32 - 1 {
        return Err(Error::InvalidContinuity { degree, continuity });
    }
    let multiplicity = (degree as i32 - continuity) as usize;
    let knots = KnotVector::open_uniform(degree, level, multiplicity)?;
    let dim = knots.knots().len() - degree - 1;
    Ok(SplineSpace {
        params: SpaceParams {
            degree,
            level,
            continuity,
        },
        knots,
        multiplicity,
        dim,
    })
}

impl SplineSpace {
    pub fn params(&self) -> SpaceParams {
        self.params
    }

    pub fn degree(&self) -> usize {
        self.params.degree
    }

    pub fn level(&self) -> u32 {
        self.params.level
    }

    pub fn continuity(&self) -> i32 {
        self.params.continuity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn knot_vector(&self) -> &KnotVector {
        &self.knots
    }

    pub fn breakpoints(&self) -> &[f64] {
        self.knots.breakpoints()
    }

    pub fn num_elements(&self) -> usize {
        self.knots.num_elements()
    }

    /// Element size `2^-ℓ`.
    pub fn mesh_size(&self) -> f64 {
        1.0 / self.num_elements() as f64
    }

    pub fn element_bounds(&self, element: usize) -> (f64, f64) {
        let b = self.breakpoints();
        (b[element], b[element + 1])
    }

    /// Element containing `x`; breakpoints belong to the element on their
    /// right, except `x = 1`.
    pub fn element_of(&self, x: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain { x });
        }
        let n = self.num_elements();
        Ok(((x * n as f64).floor() as usize).min(n - 1))
    }

    /// Index of the first basis function active on `element`.
    pub fn first_active(&self, element: usize) -> usize {
        element * self.multiplicity
    }

    /// Indices of the `p + 1` basis functions active on `element`.
    pub fn active(&self, element: usize) -> Range<usize> {
        let first = self.first_active(element);
        first..first + self.degree() + 1
    }

    /// Elements on which basis function `i` does not vanish identically.
    pub fn support_elements(&self, i: usize) -> Range<usize> {
        let p = self.degree();
        let m = self.multiplicity;
        let lo = i.saturating_sub(p).div_ceil(m);
        let hi = (i / m).min(self.num_elements() - 1);
        lo..hi + 1
    }

    /// Whether `x` coincides with a breakpoint (including 0 and 1).
    pub fn is_breakpoint(&self, x: f64) -> bool {
        let n = self.num_elements() as f64;
        let scaled = x * n;
        (scaled - scaled.round()).abs() <= 1e-12 * n.max(1.0) && (0.0..=1.0).contains(&x)
    }

    /// Breakpoint index of `x`, when `x` is a breakpoint.
    pub fn breakpoint_index(&self, x: f64) -> Option<usize> {
        self.is_breakpoint(x)
            .then(|| (x * self.num_elements() as f64).round() as usize)
    }

    /// Knot averages `(t_{i+1} + ... + t_{i+p}) / p`.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree();
        let t = self.knots.knots();
        (0..self.dim)
            .map(|i| t[i + 1..=i + p].iter().sum::<f64>() / p as f64)
            .collect()
    }

    /// `d`-th derivatives of the basis functions supported at `x`.
    pub fn eval_basis(&self, x: f64, d: usize) -> Result<BasisValues> {
        if d > self.degree() {
            return Err(Error::DerivativeOrder {
                order: d,
                degree: self.degree(),
            });
        }
        let mut all = self.eval_derivatives(x, d)?;
        Ok(BasisValues {
            first: all.first,
            values: all.values.swap_remove(d),
        })
    }

    /// Derivatives of orders `0..=max_order` of the basis functions supported at `x`.
    pub fn eval_derivatives(&self, x: f64, max_order: usize) -> Result<BasisDerivatives> {
        let element = self.element_of(x)?;
        Ok(self.eval_in_element(element, x, max_order))
    }

    /// Like [`eval_derivatives`](Self::eval_derivatives) but with the element
    /// given explicitly; `x` must lie in its closure. Orders above the degree
    /// evaluate to zero.
    pub fn eval_in_element(&self, element: usize, x: f64, max_order: usize) -> BasisDerivatives {
        let p = self.degree();
        let span = p + element * self.multiplicity;
        let mut values = ders_basis_funs(self.knots.knots(), span, p, x, max_order.min(p));
        values.resize(max_order + 1, vec![0.0; p + 1]);
        BasisDerivatives {
            first: span - p,
            values,
        }
    }
}

/// Basis function derivatives on knot span `span` (Piegl & Tiller, A2.3).
fn ders_basis_funs(t: &[f64], span: usize, p: usize, x: f64, n: usize) -> Vec<Vec<f64>> {
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = x - t[span + 1 - j];
        right[j] = t[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            // lower triangle holds knot differences
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    let mut ders = vec![vec![0.0; p + 1]; n + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }

    let mut a = [vec![0.0; p + 1], vec![0.0; p + 1]];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=n {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if rk >= 0 {
                let rk = rk as usize;
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                d = a[s2][0] * ndu[rk][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }

    let mut factor = p as f64;
    for k in 1..=n {
        for v in ders[k].iter_mut() {
            *v *= factor;
        }
        factor *= (p - k) as f64;
    }
    ders
}
