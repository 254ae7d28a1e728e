//! Symmetric positive definite sparse solves.
//!
//! The systems coming out of the least-squares formulations are badly
//! conditioned (fourth-order operators plus penalty weights spanning twelve
//! decades). They are solved by symmetric Jacobi equilibration, an envelope
//! Cholesky factorization under reverse Cuthill–McKee ordering, and iterative
//! refinement whose residuals are accumulated with error-free transformations
//! so that the refined solution is accurate well beyond `cond · ε`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dd::{two_prod, two_sum, Dd};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Symmetric system with the matrix held as its lower triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymmetricSystem {
    lower: SparseMatrix,
    rhs: Vec<Dd>,
}

impl SparseSymmetricSystem {
    /// Takes the lower triangle of `matrix` after checking that it is square and
    /// symmetric to `1e-12` relative to its largest entry.
    pub fn new(matrix: &SparseMatrix, rhs: Vec<f64>) -> Result<Self> {
        Self::with_rhs_dd(matrix, rhs.into_iter().map(Dd::from).collect())
    }

    /// [`SparseSymmetricSystem::new`] with a double-double right-hand side.
    pub fn with_rhs_dd(matrix: &SparseMatrix, rhs: Vec<Dd>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                what: "square matrix",
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        if rhs.len() != matrix.nrows() {
            return Err(Error::DimensionMismatch {
                what: "right-hand side",
                expected: matrix.nrows(),
                got: rhs.len(),
            });
        }
        let (gap, row, col) = matrix.symmetry_gap();
        if gap > 1e-12 {
            return Err(Error::NotSymmetric { row, col, gap });
        }
        let lower = SparseMatrix::from_triplets_dd(
            matrix.nrows(),
            matrix.ncols(),
            matrix.iter_dd().filter(|&(i, j, _)| j <= i).collect(),
        );
        Ok(Self { lower, rhs })
    }

    pub fn n(&self) -> usize {
        self.rhs.len()
    }

    /// Right-hand side rounded to double.
    pub fn rhs(&self) -> Vec<f64> {
        self.rhs.iter().map(|d| d.to_f64()).collect()
    }

    pub fn rhs_dd(&self) -> &[Dd] {
        &self.rhs
    }

    pub fn lower(&self) -> &SparseMatrix {
        &self.lower
    }

    /// The full symmetric matrix.
    pub fn matrix(&self) -> SparseMatrix {
        let strict: Vec<_> = self.lower.iter_dd().filter(|&(i, j, _)| i != j).collect();
        let mut triplets: Vec<_> = self.lower.iter_dd().collect();
        triplets.extend(strict.into_iter().map(|(i, j, v)| (j, i, v)));
        SparseMatrix::from_triplets_dd(self.n(), self.n(), triplets)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.lower.diagonal()
    }

    /// Scaling `d` with `dᵢ = 1/√aᵢᵢ` (1 where the diagonal is not positive),
    /// so that `D A D` has unit diagonal.
    pub fn equilibration(&self) -> Vec<f64> {
        self.diagonal()
            .iter()
            .map(|&a| if a > 0.0 { 1.0 / a.sqrt() } else { 1.0 })
            .collect()
    }

    /// `(D A D, D b)` for the given diagonal scaling.
    pub fn scaled_by(&self, d: &[f64]) -> Self {
        let lower = SparseMatrix::from_triplets_dd(
            self.n(),
            self.n(),
            self.lower.iter_dd().map(|(i, j, v)| (i, j, v * d[i] * d[j])).collect(),
        );
        let rhs = self.rhs.iter().zip(d).map(|(&b, &s)| b * s).collect();
        Self { lower, rhs }
    }

    pub fn equilibrated(&self) -> Self {
        self.scaled_by(&self.equilibration())
    }

    /// Multiplies matrix and right-hand side by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            lower: self.lower.scaled(s),
            rhs: self.rhs.iter().map(|&b| b * s).collect(),
        }
    }

    /// `‖A x - b‖₂ / ‖b‖₂` with compensated residuals.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let full = self.matrix();
        relative_norm(&residual_dd(&full, &self.rhs, x), &self.rhs())
    }

    /// Normwise backward error of `x` for the equilibrated system,
    /// `‖D r‖₂ / ‖D (|A||x| + |b|)‖₂` with `r = b - A x`.
    pub fn backward_error(&self, x: &[f64]) -> f64 {
        backward_error(&self.matrix(), &self.rhs, x, &self.equilibration())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Target for the equilibrated backward error, see [`SolveReport::residual_norm`].
    pub tol: f64,
    pub max_refine: usize,
    pub equilibrate: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_refine: 10,
            equilibrate: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Backward error `‖D r‖₂ / ‖D (|A||x| + |b|)‖₂` of the returned solution,
    /// with `D` the equilibration. Unlike `‖r‖/‖b‖` it reaches the rounding
    /// level even when `|A||x| ≫ |b|`, as for the weighted block systems.
    pub residual_norm: f64,
    /// The same quantity straight after the factorization solve.
    pub initial_residual_norm: f64,
    /// Plain `‖Ax - b‖₂ / ‖b‖₂` of the returned solution.
    pub relative_residual: f64,
    pub refinement_steps: usize,
    /// 1-norm condition estimate of the factored (equilibrated) matrix.
    pub condition_estimate: f64,
}

/// Solves `A x = b` to the residual target.
///
/// Fails with [`Error::NotPositiveDefinite`] on a nonpositive pivot, and with
/// [`Error::RefinementStalled`] (carrying the best solution found) when the
/// target is not met within `max_refine` refinement steps.
pub fn factor_and_solve(system: &SparseSymmetricSystem, opts: &SolveOptions) -> Result<(Vec<f64>, SolveReport)> {
    let n = system.n();
    let b_dd = system.rhs_dd();
    let b = &system.rhs();
    if b.iter().all(|&v| v == 0.0) {
        return Ok((vec![0.0; n], SolveReport::default()));
    }
    let d = if opts.equilibrate {
        system.equilibration()
    } else {
        vec![1.0; n]
    };
    let scaled = system.scaled_by(&d);
    let factor = EnvelopeCholesky::factor(scaled.lower())?;
    let full = system.matrix();

    let correct = |r: &[f64]| -> Vec<f64> {
        let rs: Vec<f64> = r.iter().zip(&d).map(|(a, s)| a * s).collect();
        factor.solve(&rs).iter().zip(&d).map(|(a, s)| a * s).collect()
    };

    let mut x = correct(b);
    let measure = |r: &[f64], x: &[f64]| backward_error_of(&full, b_dd, r, x, &d);
    let mut r = residual_dd(&full, b_dd, &x);
    let mut res = measure(&r, &x);
    let initial = res;
    let mut best = (x.clone(), res);
    let mut steps = 0;
    let mut last_dx = f64::INFINITY;
    while steps < opts.max_refine {
        let dx = correct(&r);
        let dx_norm = inf_norm(&dx);
        let x_norm = inf_norm(&x);
        // corrections no longer shrinking: refinement has converged
        if res <= opts.tol && (dx_norm <= 4.0 * f64::EPSILON * x_norm || dx_norm > 0.5 * last_dx) {
            break;
        }
        x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
        steps += 1;
        last_dx = dx_norm;
        r = residual_dd(&full, b_dd, &x);
        res = measure(&r, &x);
        if res <= best.1 {
            best = (x.clone(), res);
        }
    }

    let report = SolveReport {
        residual_norm: best.1,
        initial_residual_norm: initial,
        relative_residual: relative_norm(&residual_dd(&full, b_dd, &best.0), b),
        refinement_steps: steps,
        condition_estimate: factor.condition_estimate(&scaled.matrix()),
    };
    if best.1 > opts.tol {
        return Err(Error::RefinementStalled {
            solution: best.0,
            report,
        });
    }
    Ok((best.0, report))
}

/// `b - A x` accumulated in twice the working precision, using the stored
/// low parts of `A`.
pub fn residual(a: &SparseMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let b: Vec<Dd> = b.iter().map(|&v| Dd::from(v)).collect();
    residual_dd(a, &b, x)
}

/// [`residual`] with a double-double right-hand side.
pub fn residual_dd(a: &SparseMatrix, b: &[Dd], x: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| {
            let (cols, vals, tails) = a.row_dd(i);
            let (mut s, mut c) = (b[i].hi, b[i].lo);
            for (k, &j) in cols.iter().enumerate() {
                let (p, e) = two_prod(-vals[k], x[j]);
                let (t, q) = two_sum(s, p);
                s = t;
                c += q + e - tails[k] * x[j];
            }
            s + c
        })
        .collect()
}

/// Normwise backward error of `x` after scaling rows by `d`.
pub fn backward_error(a: &SparseMatrix, b: &[Dd], x: &[f64], d: &[f64]) -> f64 {
    backward_error_of(a, b, &residual_dd(a, b, x), x, d)
}

fn backward_error_of(a: &SparseMatrix, b: &[Dd], r: &[f64], x: &[f64], d: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        let ax: f64 = cols.iter().zip(vals).map(|(&j, &v)| (v * x[j]).abs()).sum();
        num += (d[i] * r[i]).powi(2);
        den += (d[i] * (ax + b[i].hi.abs())).powi(2);
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn relative_norm(r: &[f64], b: &[f64]) -> f64 {
    let nb = norm2(b);
    if nb == 0.0 {
        norm2(r)
    } else {
        norm2(r) / nb
    }
}

/// Reverse Cuthill–McKee ordering of a symmetric pattern given by its lower
/// triangle. Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(lower: &SparseMatrix) -> Vec<usize> {
    let n = lower.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in lower.iter() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let bfs_levels = |start: usize, seen: &[bool]| -> (Vec<usize>, usize) {
        let mut level = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        level[start] = 0;
        let mut order = Vec::new();
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &adj[v] {
                if !seen[w] && level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        let depth = order.iter().map(|&v| level[v]).max().unwrap_or(0);
        let last: Vec<usize> = order.iter().copied().filter(|&v| level[v] == depth).collect();
        (last, depth)
    };

    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        // lowest-degree unvisited vertex, then walk to a pseudo-peripheral one
        let mut start = (0..n)
            .filter(|&v| !seen[v])
            .min_by_key(|&v| (degree[v], v))
            .unwrap();
        let (mut last, mut depth) = bfs_levels(start, &seen);
        loop {
            let cand = *last.iter().min_by_key(|&&v| (degree[v], v)).unwrap();
            let (l2, d2) = bfs_levels(cand, &seen);
            if d2 > depth {
                start = cand;
                last = l2;
                depth = d2;
            } else {
                break;
            }
        }
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !seen[w]).collect();
            next.sort_unstable_by_key(|&w| (degree[w], w));
            for w in next {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factor `P A Pᵀ = L Lᵀ` stored row-wise over the envelope.
#[derive(Clone, Debug)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factors the symmetric matrix whose lower triangle is `lower`.
    pub fn factor(lower: &SparseMatrix) -> Result<Self> {
        let n = lower.nrows();
        let perm = reverse_cuthill_mckee(lower);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (i, j, _) in lower.iter() {
            let (a, b) = (inv[i], inv[j]);
            let (r, c) = if a >= b { (a, b) } else { (b, a) };
            first[r] = first[r].min(c);
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + i - first[i] + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for (i, j, v) in lower.iter() {
            let (a, b) = (inv[i], inv[j]);
            let (r, c) = if a >= b { (a, b) } else { (b, a) };
            data[offset[r] + c - first[r]] += v;
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let (ri, rj) = (offset[i], offset[j]);
                let dot: f64 = data[ri + k0 - fi..ri + j - fi]
                    .iter()
                    .zip(&data[rj + k0 - fj..rj + j - fj])
                    .map(|(a, b)| a * b)
                    .sum();
                let ljj = data[rj + j - fj];
                data[ri + j - fi] = (data[ri + j - fi] - dot) / ljj;
            }
            let row = &data[offset[i]..offset[i + 1] - 1];
            let d = data[offset[i + 1] - 1] - row.iter().map(|v| v * v).sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    row: perm[i],
                    pivot: d,
                });
            }
            data[offset[i + 1] - 1] = d.sqrt();
        }
        Ok(Self {
            perm,
            first,
            offset,
            data,
        })
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let dot: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - dot) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            y[i] /= row[i - fi];
            let xi = y[i];
            for (k, l) in (fi..i).zip(row) {
                y[k] -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Hager's estimate of `‖A‖₁ ‖A⁻¹‖₁` for the factored matrix `a`.
    pub fn condition_estimate(&self, a: &SparseMatrix) -> f64 {
        let n = self.n();
        if n == 0 {
            return 0.0;
        }
        let mut col_sums = vec![0.0; n];
        for (_, j, v) in a.iter() {
            col_sums[j] += v.abs();
        }
        let a_norm = col_sums.iter().fold(0.0f64, |m, v| m.max(*v));
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self.solve(&x);
            est = y.iter().map(|v| v.abs()).sum();
            let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve(&xi);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |(bj, bz), (j, v)| if v.abs() > bz { (j, v.abs()) } else { (bj, bz) });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx {
                break;
            }
            x = vec![0.0; n];
            x[jmax] = 1.0;
        }
        a_norm * est
    }
}

/// Reduced system of a block condensation together with the data needed to
/// recover the eliminated unknowns.
#[derive(Clone, Debug)]
pub struct CondensedSystem {
    pub system: SparseSymmetricSystem,
    pub recovery: BlockRecovery,
}

/// Closure `f = D⁻¹ (b_f - Bᵀ u)` of a block condensation.
#[derive(Clone, Debug)]
pub struct BlockRecovery {
    blocks: Vec<(Vec<usize>, nalgebra::Cholesky<f64, nalgebra::Dyn>)>,
    coupling_t: SparseMatrix,
    rhs_f: Vec<f64>,
}

impl BlockRecovery {
    pub fn expand(&self, u: &[f64]) -> Vec<f64> {
        let btu = self.coupling_t.matvec(u);
        let mut f = vec![0.0; self.rhs_f.len()];
        for (idx, chol) in &self.blocks {
            let r = DVector::from_iterator(idx.len(), idx.iter().map(|&k| self.rhs_f[k] - btu[k]));
            let sol = chol.solve(&r);
            for (a, &k) in idx.iter().enumerate() {
                f[k] = sol[a];
            }
        }
        f
    }

    /// Number of diagonal blocks eliminated.
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }
}

/// Lower Cholesky factor of a small dense matrix in double-double.
fn dd_cholesky(a: &[Vec<Dd>]) -> Option<Vec<Vec<Dd>>> {
    let n = a.len();
    let mut l = vec![vec![Dd::ZERO; n]; n];
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d = d - l[j][k] * l[j][k];
        }
        if !(d.hi > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        l[j][j] = djj;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            l[i][j] = s / djj;
        }
    }
    Some(l)
}

/// `L⁻¹ B` for lower triangular `L`, with `B` stored by rows.
fn dd_forward_substitute(l: &[Vec<Dd>], b: &[Vec<Dd>]) -> Vec<Vec<Dd>> {
    let mut x: Vec<Vec<Dd>> = Vec::with_capacity(b.len());
    for i in 0..b.len() {
        let mut row = b[i].clone();
        for (k, xk) in x.iter().enumerate() {
            let lik = l[i][k];
            if lik.hi != 0.0 {
                for (r, v) in row.iter_mut().zip(xk) {
                    *r = *r - lik * *v;
                }
            }
        }
        for r in row.iter_mut() {
            *r = *r / l[i][i];
        }
        x.push(row);
    }
    x
}

/// Connected components of the pattern of a square matrix, each sorted, ordered
/// by smallest member.
fn components(m: &SparseMatrix) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, j, _) in m.iter() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Eliminates the second unknown of
///
/// ```text
/// [ A   B ] [u]   [b_u]
/// [ Bᵀ  D ] [f] = [b_f]
/// ```
///
/// when `D` is block diagonal with blocks of at most `max_block` unknowns,
/// giving `(A - B D⁻¹ Bᵀ) u = b_u - B D⁻¹ b_f` and `f = D⁻¹ (b_f - Bᵀ u)`.
pub fn block_condense(
    a: &SparseMatrix,
    b: &SparseMatrix,
    d: &SparseMatrix,
    rhs_u: &[f64],
    rhs_f: &[f64],
    max_block: usize,
) -> Result<CondensedSystem> {
    let lift = |v: &[f64]| -> Vec<Dd> { v.iter().map(|&x| Dd::from(x)).collect() };
    block_condense_dd(a, b, d, &lift(rhs_u), &lift(rhs_f), max_block)
}

/// [`block_condense`] with double-double right-hand sides.
pub fn block_condense_dd(
    a: &SparseMatrix,
    b: &SparseMatrix,
    d: &SparseMatrix,
    rhs_u: &[Dd],
    rhs_f: &[Dd],
    max_block: usize,
) -> Result<CondensedSystem> {
    let (nu, nf) = (a.nrows(), d.nrows());
    if b.nrows() != nu || b.ncols() != nf || rhs_u.len() != nu || rhs_f.len() != nf {
        return Err(Error::DimensionMismatch {
            what: "condensation blocks",
            expected: nu + nf,
            got: b.nrows() + b.ncols(),
        });
    }
    let bt = b.transpose();
    let mut triplets: Vec<(usize, usize, Dd)> = a.iter_dd().collect();
    let mut reduced_rhs: Vec<Dd> = rhs_u.to_vec();
    let mut blocks = Vec::new();
    for idx in components(d) {
        if idx.len() > max_block {
            return Err(Error::NotBlockDiagonal {
                size: idx.len(),
                max: max_block,
            });
        }
        let dk = DMatrix::from_fn(idx.len(), idx.len(), |r, c| d.get(idx[r], idx[c]));
        let chol = dk.cholesky().ok_or(Error::NotPositiveDefinite {
            row: nu + idx[0],
            pivot: f64::NAN,
        })?;
        let mut rows: Vec<usize> = idx.iter().flat_map(|&k| bt.row(k).0.iter().copied()).collect();
        rows.sort_unstable();
        rows.dedup();
        // Gram form of the eliminated block, W = L⁻¹ B_kᵀ with D_k = L Lᵀ, so
        // that B_k D_k⁻¹ B_kᵀ = WᵀW is formed without cancellation
        let dd_entry = |m: &SparseMatrix, i: usize, j: usize| -> Dd {
            let (cols, vals, tails) = m.row_dd(i);
            cols.binary_search(&j).map_or(Dd::ZERO, |k| Dd { hi: vals[k], lo: tails[k] })
        };
        let dkk: Vec<Vec<Dd>> = idx.iter().map(|&r| idx.iter().map(|&c| dd_entry(d, r, c)).collect()).collect();
        let l = dd_cholesky(&dkk).ok_or(Error::NotPositiveDefinite {
            row: nu + idx[0],
            pivot: f64::NAN,
        })?;
        let bkt: Vec<Vec<Dd>> = idx.iter().map(|&k| rows.iter().map(|&r| dd_entry(&bt, k, r)).collect()).collect();
        let w = dd_forward_substitute(&l, &bkt);
        for r in 0..rows.len() {
            for c in 0..=r {
                let mut sum = Dd::ZERO;
                for wk in &w {
                    sum += wk[r] * wk[c];
                }
                triplets.push((rows[r], rows[c], -sum));
                if c != r {
                    triplets.push((rows[c], rows[r], -sum));
                }
            }
        }
        let fk: Vec<Vec<Dd>> = idx.iter().map(|&k| vec![rhs_f[k]]).collect();
        let g = dd_forward_substitute(&l, &fk);
        for (r, &row) in rows.iter().enumerate() {
            let mut sum = Dd::ZERO;
            for (wk, gk) in w.iter().zip(&g) {
                sum += wk[r] * gk[0];
            }
            reduced_rhs[row] += -sum;
        }
        blocks.push((idx, chol));
    }
    let reduced = SparseMatrix::from_triplets_dd(nu, nu, triplets);
    Ok(CondensedSystem {
        system: SparseSymmetricSystem::with_rhs_dd(&reduced, reduced_rhs)?,
        recovery: BlockRecovery {
            blocks,
            coupling_t: bt,
            rhs_f: rhs_f.iter().map(|d| d.to_f64()).collect(),
        },
    })
}
