//! Scalar fields on the unit square together with their derivatives up to order two.

use std::ops::{Add, Mul, Sub};

/// Value, gradient and Hessian of a scalar field at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Derivs2 {
    pub value: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
}

impl Derivs2 {
    pub fn laplacian(&self) -> f64 {
        self.dxx + self.dyy
    }
}

impl Add for Derivs2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            value: self.value + o.value,
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
            dxx: self.dxx + o.dxx,
            dxy: self.dxy + o.dxy,
            dyy: self.dyy + o.dyy,
        }
    }
}

impl Sub for Derivs2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + o * -1.0
    }
}

impl Mul<f64> for Derivs2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self {
            value: self.value * s,
            dx: self.dx * s,
            dy: self.dy * s,
            dxx: self.dxx * s,
            dxy: self.dxy * s,
            dyy: self.dyy * s,
        }
    }
}

/// A scalar field with closed-form derivatives up to order two.
pub trait Field: Send + Sync {
    fn derivs(&self, x: f64, y: f64) -> Derivs2;

    fn value(&self, x: f64, y: f64) -> f64 {
        self.derivs(x, y).value
    }

    fn laplacian(&self, x: f64, y: f64) -> f64 {
        self.derivs(x, y).laplacian()
    }
}

/// `amplitude · φ(kπx) · φ(kπy)` with `φ` either cosine or sine.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrigProduct {
    pub kind: Trig,
    pub wavenumber: f64,
    pub amplitude: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trig {
    Cos,
    Sin,
}

impl TrigProduct {
    /// `(φ, φ', φ'')` of the 1D factor at `t`.
    fn factor(&self, t: f64) -> (f64, f64, f64) {
        let w = self.wavenumber * std::f64::consts::PI;
        let (s, c) = (w * t).sin_cos();
        match self.kind {
            Trig::Cos => (c, -w * s, -w * w * c),
            Trig::Sin => (s, w * c, -w * w * s),
        }
    }
}

impl Field for TrigProduct {
    fn derivs(&self, x: f64, y: f64) -> Derivs2 {
        let (fx, dfx, ddfx) = self.factor(x);
        let (fy, dfy, ddfy) = self.factor(y);
        let a = self.amplitude;
        Derivs2 {
            value: a * fx * fy,
            dx: a * dfx * fy,
            dy: a * fx * dfy,
            dxx: a * ddfx * fy,
            dxy: a * dfx * dfy,
            dyy: a * fx * ddfy,
        }
    }
}

/// Bivariate polynomial `Σ c[i][j] xⁱ yʲ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Vec<f64>>,
}

impl Polynomial {
    /// `coeffs[i][j]` multiplies `xⁱ yʲ`.
    pub fn new(coeffs: Vec<Vec<f64>>) -> Self {
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![vec![c]])
    }

    /// `x(1-x) + y(1-y)`, whose Laplacian is `-4`.
    pub fn paraboloid() -> Self {
        Self::new(vec![vec![0.0, 1.0, -1.0], vec![1.0], vec![-1.0]])
    }

    /// `x(1-x) y(1-y)`, vanishing on the boundary of the unit square.
    pub fn bubble() -> Self {
        Self::new(vec![vec![0.0, 0.0, 0.0], vec![0.0, 1.0, -1.0], vec![0.0, -1.0, 1.0]])
    }

    /// `-Δ` of [`bubble`](Self::bubble): `2y(1-y) + 2x(1-x)`.
    pub fn bubble_source() -> Self {
        Self::new(vec![vec![0.0, 2.0, -2.0], vec![2.0], vec![-2.0]])
    }

    /// Largest exponent in either variable.
    pub fn degree(&self) -> usize {
        let dx = self.coeffs.len().saturating_sub(1);
        let dy = self.coeffs.iter().map(|r| r.len().saturating_sub(1)).max().unwrap_or(0);
        dx.max(dy)
    }
}

/// `(tⁿ, n tⁿ⁻¹, n(n-1) tⁿ⁻²)`.
fn monomial(n: usize, t: f64) -> (f64, f64, f64) {
    let nf = n as f64;
    let p = |k: usize| if n >= k { t.powi((n - k) as i32) } else { 0.0 };
    (p(0), nf * p(1), nf * (nf - 1.0) * p(2))
}

impl Field for Polynomial {
    fn derivs(&self, x: f64, y: f64) -> Derivs2 {
        let mut out = Derivs2::default();
        for (i, row) in self.coeffs.iter().enumerate() {
            let (mx, dmx, ddmx) = monomial(i, x);
            for (j, &c) in row.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let (my, dmy, ddmy) = monomial(j, y);
                out.value += c * mx * my;
                out.dx += c * dmx * my;
                out.dy += c * mx * dmy;
                out.dxx += c * ddmx * my;
                out.dxy += c * dmx * dmy;
                out.dyy += c * mx * ddmy;
            }
        }
        out
    }
}

/// Sum of fields scaled by constants; `Combination::new(vec![])` is the zero field.
pub struct Combination {
    terms: Vec<(f64, Box<dyn Field>)>,
}

impl Combination {
    pub fn new(terms: Vec<(f64, Box<dyn Field>)>) -> Self {
        Self { terms }
    }
}

impl Field for Combination {
    fn derivs(&self, x: f64, y: f64) -> Derivs2 {
        self.terms
            .iter()
            .fold(Derivs2::default(), |acc, (c, f)| acc + f.derivs(x, y) * *c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_closed_forms() {
        let p = Polynomial::paraboloid();
        let d = p.derivs(0.3, 0.8);
        assert_abs_diff_eq!(d.value, 0.3 * 0.7 + 0.8 * 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(d.laplacian(), -4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.dxy, 0.0);
        let b = Polynomial::bubble().derivs(0.25, 0.5);
        assert_abs_diff_eq!(b.value, 0.25 * 0.75 * 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(b.dxy, (1.0 - 0.5) * (1.0 - 1.0), epsilon = 1e-15);
        let s = Polynomial::bubble_source().value(0.25, 0.5);
        assert_abs_diff_eq!(-Polynomial::bubble().laplacian(0.25, 0.5), s, epsilon = 1e-15);
        assert_eq!(Polynomial::bubble().degree(), 2);
    }

    #[test]
    fn trig_product_derivatives() {
        let f = TrigProduct {
            kind: Trig::Sin,
            wavenumber: 2.0,
            amplitude: 3.0,
        };
        let d = f.derivs(0.1, 0.2);
        let w = 2.0 * std::f64::consts::PI;
        assert_abs_diff_eq!(d.dxy, 3.0 * w * w * (w * 0.1).cos() * (w * 0.2).cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(d.laplacian(), -2.0 * w * w * d.value, epsilon = 1e-11);
    }

    #[test]
    fn combination_is_linear() {
        let c = Combination::new(vec![
            (2.0, Box::new(Polynomial::constant(1.0))),
            (-1.0, Box::new(Polynomial::paraboloid())),
        ]);
        let d = c.derivs(0.5, 0.5);
        assert_abs_diff_eq!(d.value, 2.0 - 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d.laplacian(), 4.0, epsilon = 1e-15);
    }
}
