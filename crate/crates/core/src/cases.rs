//! Manufactured exact solutions and data for the forward and inverse experiments.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{Field, Polynomial, Trig, TrigProduct};

/// An exact state with its consistent source `-Δu`.
///
/// For the forward problem the state doubles as boundary data `g`; for the
/// inverse problem it is the observation `u_d` and the source is the prior `f_p`.
#[derive(Clone)]
pub struct ManufacturedCase {
    name: String,
    wavenumber: Option<u32>,
    exact: Arc<dyn Field>,
    source: Arc<dyn Field>,
}

impl fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("name", &self.name)
            .field("wavenumber", &self.wavenumber)
            .finish_non_exhaustive()
    }
}

fn check_wavenumber(k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "wavenumber must be at least 1".into(),
        });
    }
    Ok(k as f64)
}

/// `u = g = cos(kπx) cos(kπy)` with `f = -Δu = 2k²π² cos(kπx) cos(kπy)`.
pub fn example1_case(k: u32) -> Result<ManufacturedCase> {
    let kf = check_wavenumber(k)?;
    let pi2 = std::f64::consts::PI.powi(2);
    Ok(ManufacturedCase {
        name: format!("cos-cos-k{k}"),
        wavenumber: Some(k),
        exact: Arc::new(TrigProduct {
            kind: Trig::Cos,
            wavenumber: kf,
            amplitude: 1.0,
        }),
        source: Arc::new(TrigProduct {
            kind: Trig::Cos,
            wavenumber: kf,
            amplitude: 2.0 * kf * kf * pi2,
        }),
    })
}

/// `u_d = sin(πkx) sin(πky)` with prior `f_p = 2π²k² sin(πkx) sin(πky) = -Δu_d`.
pub fn example2_case(k: u32) -> Result<ManufacturedCase> {
    let kf = check_wavenumber(k)?;
    let pi2 = std::f64::consts::PI.powi(2);
    Ok(ManufacturedCase {
        name: format!("sin-sin-k{k}"),
        wavenumber: Some(k),
        exact: Arc::new(TrigProduct {
            kind: Trig::Sin,
            wavenumber: kf,
            amplitude: 1.0,
        }),
        source: Arc::new(TrigProduct {
            kind: Trig::Sin,
            wavenumber: kf,
            amplitude: 2.0 * kf * kf * pi2,
        }),
    })
}

/// `u = x(1-x) + y(1-y)`, `f = 4`: lies in every quadratic spline space.
pub fn paraboloid_case() -> ManufacturedCase {
    ManufacturedCase::custom("paraboloid", Arc::new(Polynomial::paraboloid()), Arc::new(Polynomial::constant(4.0)))
}

/// `u = x(1-x) y(1-y)`, `f = 2y(1-y) + 2x(1-x)`: vanishes on the boundary.
pub fn bubble_case() -> ManufacturedCase {
    ManufacturedCase::custom("bubble", Arc::new(Polynomial::bubble()), Arc::new(Polynomial::bubble_source()))
}

impl ManufacturedCase {
    /// A case built from arbitrary fields; `source` should equal `-Δ exact`.
    pub fn custom(name: &str, exact: Arc<dyn Field>, source: Arc<dyn Field>) -> Self {
        Self {
            name: name.to_string(),
            wavenumber: None,
            exact,
            source,
        }
    }

    /// The same state with a zero source, for inverse runs without a prior.
    pub fn without_prior(&self) -> Self {
        Self {
            name: format!("{}-zero-prior", self.name),
            source: Arc::new(Polynomial::constant(0.0)),
            ..self.clone()
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn wavenumber(&self) -> Option<u32> {
        self.wavenumber
    }

    pub fn u(&self) -> &dyn Field {
        self.exact.as_ref()
    }

    pub fn f(&self) -> &dyn Field {
        self.source.as_ref()
    }

    pub fn g(&self) -> &dyn Field {
        self.exact.as_ref()
    }

    pub fn u_d(&self) -> &dyn Field {
        self.exact.as_ref()
    }

    pub fn f_p(&self) -> &dyn Field {
        self.source.as_ref()
    }
}
