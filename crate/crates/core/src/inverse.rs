//! Least-squares inverse source problem with partial observations.
//!
//! Minimizes `‖v - u_d‖²_Γ + γ² ‖-Δv - g‖²_Ω + β² ‖g - f_p‖²_Ω` over states
//! `v` in `S(p,ℓ,p-1)²` vanishing on `∂Ω` and controls `g` in `S(p,ℓ,q)²`.
//! The normal equations form the symmetric positive definite block system
//!
//! ```text
//! [ M_Γ + γ²L   γ²C        ] [u]   [(u_d, v)_Γ    ]
//! [ γ²Cᵀ        (β²+γ²)M_f ] [f] = [β² (f_p, g)_Ω ]
//! ```
//!
//! With the reduced control space (`q = p-3`) every `Δu_h` lies in `F_h`, so
//! `Cᵀ`-coupling through `M_f⁻¹` reproduces `(Δu, Δv)` exactly.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{cross_laplace_gramian, laplace_gramian_2d, laplace_trial_gramian, load_vector_dd, mass_2d, subdomain_mass, LoadAction};
use crate::cases::{example2_case, ManufacturedCase};
use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::forward::StudyCell;
use crate::metrics::{field_error, field_norms};
use crate::solve::{block_condense_dd, factor_and_solve, residual_dd, SolveOptions, SolveReport, SparseSymmetricSystem};
use crate::sparse::SparseMatrix;
use crate::spline::make_space;
use crate::tensor::{Rect, TensorSpace};

/// Choice of the discrete control space `F_h = S(p,ℓ,q)²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlSpace {
    /// `q = p - 1`, the continuity of the state space.
    MaxContinuity,
    /// `q = p - 3`, so that `ΔU_h ⊂ F_h`.
    Reduced,
}

impl ControlSpace {
    pub fn continuity(self, degree: usize) -> i32 {
        match self {
            ControlSpace::MaxContinuity => degree as i32 - 1,
            ControlSpace::Reduced => degree as i32 - 3,
        }
    }

    /// Whether `ΔU_h ⊂ F_h` holds.
    pub fn is_containment(self) -> bool {
        self == ControlSpace::Reduced
    }

    pub fn name(self) -> &'static str {
        match self {
            ControlSpace::MaxContinuity => "max",
            ControlSpace::Reduced => "reduced",
        }
    }
}

impl fmt::Display for ControlSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControlSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" | "max-continuity" => Ok(ControlSpace::MaxContinuity),
            "reduced" => Ok(ControlSpace::Reduced),
            _ => Err(Error::InvalidParameter {
                name: "control-space",
                reason: format!("unknown control space {s:?}; expected max or reduced"),
            }),
        }
    }
}

/// Default observation rectangle `(0.25, 0.75)²`.
pub fn default_observation() -> Rect {
    Rect::square(0.25, 0.75)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseConfig {
    pub degree: usize,
    pub level: u32,
    pub beta2: f64,
    pub gamma2: f64,
    pub k: u32,
    pub control: ControlSpace,
    pub observation: Rect,
}

impl InverseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.degree < 2 {
            return Err(Error::InvalidParameter {
                name: "p",
                reason: format!("degree {} < 2; second derivatives are required", self.degree),
            });
        }
        for (name, v) in [("beta2", self.beta2), ("gamma2", self.gamma2)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{v} is not a positive finite weight"),
                });
            }
        }
        let r = self.observation;
        if !(0.0 <= r.x0 && r.x0 < r.x1 && r.x1 <= 1.0 && 0.0 <= r.y0 && r.y0 < r.y1 && r.y1 <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "gamma-rect",
                reason: format!("{r:?} is not a nonempty rectangle inside the unit square"),
            });
        }
        Ok(())
    }

    /// `S(p,ℓ,p-1)²` restricted to functions vanishing on the boundary.
    pub fn state_space(&self) -> Result<TensorSpace> {
        self.validate()?;
        let s = make_space(self.degree, self.level, self.degree as i32 - 1)?;
        Ok(TensorSpace::square(s, true))
    }

    pub fn control_space(&self) -> Result<TensorSpace> {
        self.validate()?;
        let s = make_space(self.degree, self.level, self.control.continuity(self.degree))?;
        Ok(TensorSpace::square(s, false))
    }
}

/// Weight-independent pieces of the inverse system.
#[derive(Clone, Debug)]
pub struct InverseOperators {
    pub state: TensorSpace,
    pub control: TensorSpace,
    /// `(u, v)_Γ` on the state space.
    pub observation_mass: SparseMatrix,
    /// `(Δu, Δv)_Ω` on the state space.
    pub laplace: SparseMatrix,
    /// `(f, Δv)_Ω`, rows state, columns control.
    pub cross: SparseMatrix,
    /// `(f, g)_Ω` on the control space.
    pub control_mass: SparseMatrix,
    /// `(u_d, v)_Γ`
    pub load_observation: Vec<Dd>,
    /// `(f_p, g)_Ω`
    pub load_prior: Vec<Dd>,
}

impl InverseOperators {
    /// Assembles everything that does not depend on `β²` and `γ²`.
    pub fn assemble(cfg: &InverseConfig, u_d: &dyn Field, f_p: &dyn Field) -> Result<Self> {
        let state = cfg.state_space()?;
        let control = cfg.control_space()?;
        let observation_mass = subdomain_mass(&state, &state, cfg.observation)?;
        let laplace = laplace_gramian_2d(&state, &state)?;
        let cross = cross_laplace_gramian(&state, &control)?;
        let control_mass = mass_2d(&control, &control)?;
        let points = cfg.degree + 2;
        let load_observation = load_vector_dd(&state, &|x, y| u_d.value(x, y), LoadAction::Subdomain(cfg.observation), points)?;
        let load_prior = load_vector_dd(&control, &|x, y| f_p.value(x, y), LoadAction::Domain, points)?;
        Ok(Self {
            state,
            control,
            observation_mass,
            laplace,
            cross,
            control_mass,
            load_observation,
            load_prior,
        })
    }

    pub fn blocks(&self, beta2: f64, gamma2: f64) -> WeightedBlocks {
        WeightedBlocks {
            a: SparseMatrix::linear_combination(&[(1.0, &self.observation_mass), (gamma2, &self.laplace)]),
            b: self.cross.scaled(gamma2),
            d: self.control_mass.scaled(beta2 + gamma2),
            rhs_u: self.load_observation.clone(),
            rhs_f: self.load_prior.iter().map(|&v| v * beta2).collect(),
        }
    }
}

/// `[[A, B], [Bᵀ, D]]` with its right-hand side `[rhs_u; rhs_f]`.
#[derive(Clone, Debug)]
pub struct WeightedBlocks {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub d: SparseMatrix,
    pub rhs_u: Vec<Dd>,
    pub rhs_f: Vec<Dd>,
}

impl WeightedBlocks {
    pub fn matrix(&self) -> SparseMatrix {
        let bt = self.b.transpose();
        SparseMatrix::block(&[vec![Some(&self.a), Some(&self.b)], vec![Some(&bt), Some(&self.d)]])
    }

    pub fn rhs(&self) -> Vec<Dd> {
        self.rhs_u.iter().chain(&self.rhs_f).copied().collect()
    }

    pub fn monolithic(&self) -> Result<SparseSymmetricSystem> {
        SparseSymmetricSystem::with_rhs_dd(&self.matrix(), self.rhs())
    }

    /// Relative residuals of the two block equations, each measured against
    /// the size of the terms in that block: `‖r‖ / (‖|K||x|‖ + ‖b‖)`.
    ///
    /// Dividing by `‖b‖` alone is not attainable in double precision, as the
    /// `γ²`-weighted terms cancel and leave a rounding floor near
    /// `eps · ‖|K||x|‖ / ‖b‖`.
    pub fn optimality_residual(&self, u: &[f64], f: &[f64]) -> (f64, f64) {
        let x: Vec<f64> = u.iter().chain(f).copied().collect();
        let m = self.matrix();
        let r = residual_dd(&m, &self.rhs(), &x);
        let mut size = vec![0.0; x.len()];
        for (i, j, v) in m.iter() {
            size[i] += (v * x[j]).abs();
        }
        let b: Vec<f64> = self.rhs().iter().map(|d| d.to_f64()).collect();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let rel = |range: std::ops::Range<usize>| {
            let scale = norm(&size[range.clone()]) + norm(&b[range.clone()]);
            if scale > 0.0 {
                norm(&r[range]) / scale
            } else {
                0.0
            }
        };
        let nu = u.len();
        (rel(0..nu), rel(nu..x.len()))
    }
}

/// How to solve the block system.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStrategy {
    /// Condense when the control mass matrix is element-block diagonal.
    #[default]
    Auto,
    Monolithic,
    Condensed,
}

/// Assembled system of one configuration.
#[derive(Clone, Debug)]
pub struct InverseSystem {
    pub operators: InverseOperators,
    pub blocks: WeightedBlocks,
}

impl InverseSystem {
    pub fn system(&self) -> Result<SparseSymmetricSystem> {
        self.blocks.monolithic()
    }
}

pub fn assemble_inverse(cfg: &InverseConfig, u_d: &dyn Field, f_p: &dyn Field) -> Result<InverseSystem> {
    let operators = InverseOperators::assemble(cfg, u_d, f_p)?;
    let blocks = operators.blocks(cfg.beta2, cfg.gamma2);
    Ok(InverseSystem { operators, blocks })
}

#[derive(Clone, Debug)]
pub struct InverseSolution {
    pub state: TensorSpace,
    pub control: TensorSpace,
    pub u_coeffs: Vec<f64>,
    pub f_coeffs: Vec<f64>,
    pub report: SolveReport,
    /// Whether the control unknowns were eliminated blockwise.
    pub condensed: bool,
}

/// Solves the weighted block system of `operators`.
pub fn solve_blocks(
    operators: &InverseOperators,
    beta2: f64,
    gamma2: f64,
    strategy: SolveStrategy,
    opts: &SolveOptions,
) -> Result<InverseSolution> {
    let blocks = operators.blocks(beta2, gamma2);
    let q = operators.control.x().continuity();
    let condense = match strategy {
        SolveStrategy::Auto => q < 0,
        SolveStrategy::Monolithic => false,
        SolveStrategy::Condensed => true,
    };
    let nu = operators.state.dim();
    let (u, f, report) = if condense {
        let p = operators.control.max_degree();
        let cs = block_condense_dd(&blocks.a, &blocks.b, &blocks.d, &blocks.rhs_u, &blocks.rhs_f, (p + 1) * (p + 1))?;
        let (u, report) = factor_and_solve(&cs.system, opts)?;
        let f = cs.recovery.expand(&u);
        (u, f, report)
    } else {
        let (x, report) = factor_and_solve(&blocks.monolithic()?, opts)?;
        (x[..nu].to_vec(), x[nu..].to_vec(), report)
    };
    Ok(InverseSolution {
        state: operators.state.clone(),
        control: operators.control.clone(),
        u_coeffs: u,
        f_coeffs: f,
        report,
        condensed: condense,
    })
}

pub fn solve_inverse(cfg: &InverseConfig, u_d: &dyn Field, f_p: &dyn Field, opts: &SolveOptions) -> Result<InverseSolution> {
    let operators = InverseOperators::assemble(cfg, u_d, f_p)?;
    solve_blocks(&operators, cfg.beta2, cfg.gamma2, SolveStrategy::Auto, opts)
}

/// `‖u_h - u_d‖²_Γ + γ² ‖-Δu_h - f_h‖²_Ω + β² ‖f_h - f_p‖²_Ω` by direct quadrature.
pub fn inverse_loss(cfg: &InverseConfig, sol: &InverseSolution, u_d: &dyn Field, f_p: &dyn Field) -> Result<f64> {
    let points = cfg.degree + 3;
    let (us, fs) = (&sol.state, &sol.control);
    let fields = [(us, sol.u_coeffs.as_slice()), (fs, sol.f_coeffs.as_slice())];
    let obs = us.integrate_fields(&fields[..1], cfg.observation, points, |x, y, v| (v[0].value - u_d.value(x, y)).powi(2))?;
    let pde = us.integrate_fields(&fields, Rect::unit(), points, |_, _, v| (-v[0].laplacian() - v[1].value).powi(2))?;
    let prior = us.integrate_fields(&fields[1..], Rect::unit(), points, |x, y, v| (v[0].value - f_p.value(x, y)).powi(2))?;
    Ok(obs + cfg.gamma2 * pde + cfg.beta2 * prior)
}

/// `‖u_d‖²_Γ + β² ‖f_p‖²_Ω`, the constant of `L(x) = xᵀKx - 2xᵀb + c`.
pub fn inverse_loss_constant(cfg: &InverseConfig, space: &TensorSpace, u_d: &dyn Field, f_p: &dyn Field) -> Result<f64> {
    let points = cfg.degree + 3;
    let obs = space.integrate(cfg.observation, points, |x, y| u_d.value(x, y).powi(2))?;
    let prior = space.integrate(Rect::unit(), points, |x, y| f_p.value(x, y).powi(2))?;
    Ok(obs + cfg.beta2 * prior)
}

/// Solves one configuration and measures the state error against `u_d`.
pub fn run_inverse(cfg: &InverseConfig, case: &ManufacturedCase, opts: &SolveOptions) -> Result<StudyCell<InverseConfig>> {
    let operators = InverseOperators::assemble(cfg, case.u_d(), case.f_p())?;
    run_with_operators(cfg, &operators, case, opts, Instant::now())
}

fn run_with_operators(
    cfg: &InverseConfig,
    operators: &InverseOperators,
    case: &ManufacturedCase,
    opts: &SolveOptions,
    start: Instant,
) -> Result<StudyCell<InverseConfig>> {
    let sol = solve_blocks(operators, cfg.beta2, cfg.gamma2, SolveStrategy::Auto, opts)?;
    Ok(StudyCell {
        config: *cfg,
        errors: field_error(&sol.u_coeffs, &sol.state, case.u_d())?,
        reference: field_norms(&sol.state, case.u_d())?,
        solve: sol.report,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Solves the sine manufactured problem for every `(β², γ²)` pair, ordered by
/// `β²` (rows) then `γ²` (columns). Operators are assembled once and the cells
/// solved in parallel.
#[allow(clippy::too_many_arguments)]
pub fn inverse_parameter_sweep(
    degree: usize,
    level: u32,
    k: u32,
    beta2s: &[f64],
    gamma2s: &[f64],
    control: ControlSpace,
    observation: Rect,
    opts: &SolveOptions,
) -> Result<Vec<StudyCell<InverseConfig>>> {
    let case = example2_case(k)?;
    let base = InverseConfig {
        degree,
        level,
        beta2: 1.0,
        gamma2: 1.0,
        k,
        control,
        observation,
    };
    inverse_sweep_with_case(&base, &case, beta2s, gamma2s, opts)
}

/// [`inverse_parameter_sweep`] for an arbitrary case; the weights of `base`
/// are replaced by each grid pair.
pub fn inverse_sweep_with_case(
    base: &InverseConfig,
    case: &ManufacturedCase,
    beta2s: &[f64],
    gamma2s: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<StudyCell<InverseConfig>>> {
    if beta2s.is_empty() || gamma2s.is_empty() {
        return Err(Error::InvalidParameter {
            name: "beta2/gamma2",
            reason: "parameter lists must be nonempty".into(),
        });
    }
    let configs: Vec<InverseConfig> = beta2s
        .iter()
        .flat_map(|&beta2| gamma2s.iter().map(move |&gamma2| InverseConfig { beta2, gamma2, ..*base }))
        .collect();
    for c in &configs {
        c.validate()?;
    }
    let operators = InverseOperators::assemble(&configs[0], case.u_d(), case.f_p())?;
    configs
        .par_iter()
        .map(|c| run_with_operators(c, &operators, case, opts, Instant::now()))
        .collect()
}

/// Dense forms `S = AᵀM_f⁻¹A` and `L` on the state space, where
/// `A_{gu} = (Δu, g)_Ω`.
#[derive(Clone, Debug)]
pub struct SchurForms {
    pub schur: DMatrix<f64>,
    pub laplace: DMatrix<f64>,
    pub state: TensorSpace,
    pub control: ControlSpace,
}

/// Largest level accepted by the dense Schur computation.
pub const SCHUR_MAX_LEVEL: u32 = 3;

impl SchurForms {
    pub fn new(degree: usize, level: u32, control: ControlSpace) -> Result<Self> {
        if level > SCHUR_MAX_LEVEL {
            return Err(Error::InvalidParameter {
                name: "ell",
                reason: format!("level {level} exceeds {SCHUR_MAX_LEVEL} for the dense Schur check"),
            });
        }
        let cfg = InverseConfig {
            degree,
            level,
            beta2: 1.0,
            gamma2: 1.0,
            k: 1,
            control,
            observation: Rect::unit(),
        };
        let state = cfg.state_space()?;
        let ctrl = cfg.control_space()?;
        let a = laplace_trial_gramian(&ctrl, &state)?.to_dense();
        let m = mass_2d(&ctrl, &ctrl)?.to_dense();
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::DegenerateInput("control mass matrix is not positive definite".into()))?;
        let w = chol.solve(&a);
        let s = a.transpose() * w;
        let schur = (&s + s.transpose()) * 0.5;
        let laplace = laplace_gramian_2d(&state, &state)?.to_dense();
        Ok(Self {
            schur,
            laplace,
            state,
            control,
        })
    }

    /// `((AᵀM_f⁻¹A u, u), ‖Δu_h‖²)`
    pub fn forms(&self, u: &[f64]) -> (f64, f64) {
        let u = DVector::from_column_slice(u);
        (u.dot(&(&self.schur * &u)), u.dot(&(&self.laplace * &u)))
    }

    /// `|(AᵀM_f⁻¹A u, u) - ‖Δu_h‖²| / ‖Δu_h‖²`
    pub fn gap(&self, u: &[f64]) -> f64 {
        let (s, l) = self.forms(u);
        (s - l).abs() / l
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchurCheck {
    pub max_relative_gap: f64,
    pub is_containment: bool,
    /// `(AᵀM_f⁻¹A u, u) ≤ ‖Δu_h‖² (1 + 1e-10)` for every tested `u`.
    pub upper_bound_holds: bool,
    pub vectors_tested: usize,
}

impl SchurCheck {
    /// Containment spaces must reproduce the form; the others must respect the
    /// upper bound and show a visible gap.
    pub fn passes(&self) -> bool {
        if self.is_containment {
            self.upper_bound_holds && self.max_relative_gap <= 1e-10
        } else {
            self.upper_bound_holds && self.max_relative_gap > 1e-3
        }
    }
}

/// Compares the two quadratic forms over every basis vector of the state space
/// and `random` seeded random vectors.
pub fn schur_identity_check(degree: usize, level: u32, control: ControlSpace, random: usize, seed: u64) -> Result<SchurCheck> {
    let forms = SchurForms::new(degree, level, control)?;
    let n = forms.state.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_gap = 0.0f64;
    let mut upper = true;
    let mut check = |u: &[f64]| {
        let (s, l) = forms.forms(u);
        max_gap = max_gap.max((s - l).abs() / l);
        upper &= s <= l * (1.0 + 1e-10);
    };
    let mut e = vec![0.0; n];
    for i in 0..n {
        e[i] = 1.0;
        check(&e);
        e[i] = 0.0;
    }
    for _ in 0..random {
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        check(&u);
    }
    Ok(SchurCheck {
        max_relative_gap: max_gap,
        is_containment: control.is_containment(),
        upper_bound_holds: upper,
        vectors_tested: n + random,
    })
}
