//! Compressed sparse row matrices with the handful of operations the
//! assembly and solver layers need.
//!
//! Every entry is stored as a double-double `hi + lo`. Arithmetic on whole
//! matrices (Kronecker products, linear combinations, duplicate summation)
//! keeps the tails, so assembled operators carry about 32 significant digits
//! into residual computations while factorizations use `hi` alone.

use std::io::{self, Write};

use nalgebra::DMatrix;

use crate::dd::Dd;

/// Real CSR matrix; column indices are sorted within each row and unique.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    tails: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
            tails: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
            tails: vec![0.0; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// in input order, so the result is independent of anything but the input.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: Vec<(usize, usize, f64)>) -> Self {
        Self::from_triplets_dd(nrows, ncols, triplets.into_iter().map(|(i, j, v)| (i, j, Dd::from(v))).collect())
    }

    /// [`SparseMatrix::from_triplets`] with double-double values.
    pub fn from_triplets_dd(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, Dd)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut acc: Vec<Dd> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            if last == Some((i, j)) {
                *acc.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                acc.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values: acc.iter().map(|d| d.hi).collect(),
            tails: acc.iter().map(|d| d.lo).collect(),
        }
    }

    pub fn from_dense(dense: &DMatrix<f64>) -> Self {
        let mut triplets = Vec::new();
        for i in 0..dense.nrows() {
            for j in 0..dense.ncols() {
                if dense[(i, j)] != 0.0 {
                    triplets.push((i, j, dense[(i, j)]));
                }
            }
        }
        Self::from_triplets(dense.nrows(), dense.ncols(), triplets)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Row `i` with the low parts of its entries.
    pub fn row_dd(&self, i: usize) -> (&[usize], &[f64], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r.clone()], &self.tails[r])
    }

    /// Stored entry at `(i, j)`, zero if absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.row(i).0.binary_search(&j).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn iter_dd(&self) -> impl Iterator<Item = (usize, usize, Dd)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals, tails) = self.row_dd(i);
            cols.iter()
                .zip(vals.iter().zip(tails))
                .map(move |(&j, (&hi, &lo))| (i, j, Dd { hi, lo }))
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    /// `vᵀ A u`.
    pub fn bilinear(&self, v: &[f64], u: &[f64]) -> f64 {
        v.iter().zip(self.matvec(u)).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> Self {
        let t = self.iter_dd().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets_dd(self.ncols, self.nrows, t)
    }

    /// Kronecker product `a ⊗ b`, row index `i_a * b.nrows + i_b`.
    pub fn kron(a: &Self, b: &Self) -> Self {
        let nrows = a.nrows * b.nrows;
        let ncols = a.ncols * b.ncols;
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(a.nnz() * b.nnz());
        let mut values = Vec::with_capacity(a.nnz() * b.nnz());
        let mut tails = Vec::with_capacity(a.nnz() * b.nnz());
        row_ptr.push(0);
        for ia in 0..a.nrows {
            let (ca, va, ta) = a.row_dd(ia);
            for ib in 0..b.nrows {
                let (cb, vb, tb) = b.row_dd(ib);
                for (k, &ja) in ca.iter().enumerate() {
                    let xa = Dd { hi: va[k], lo: ta[k] };
                    for (l, &jb) in cb.iter().enumerate() {
                        let p = xa * Dd { hi: vb[l], lo: tb[l] };
                        col_idx.push(ja * b.ncols + jb);
                        values.push(p.hi);
                        tails.push(p.lo);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
            tails,
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let t = self.iter_dd().map(|(i, j, v)| (i, j, v * alpha)).collect();
        Self::from_triplets_dd(self.nrows, self.ncols, t)
    }

    /// `Σ cₖ Aₖ` over matrices of equal shape; the pattern is the union of patterns.
    pub fn linear_combination(terms: &[(f64, &Self)]) -> Self {
        let (nrows, ncols) = (terms[0].1.nrows, terms[0].1.ncols);
        let mut triplets = Vec::with_capacity(terms.iter().map(|t| t.1.nnz()).sum());
        for &(c, m) in terms {
            assert_eq!((m.nrows, m.ncols), (nrows, ncols), "shape mismatch");
            triplets.extend(m.iter_dd().map(|(i, j, v)| (i, j, v * c)));
        }
        Self::from_triplets_dd(nrows, ncols, triplets)
    }

    /// Submatrix keeping the listed rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut triplets = Vec::new();
        for (new_i, &i) in rows.iter().enumerate() {
            let (c, v, t) = self.row_dd(i);
            for (k, &j) in c.iter().enumerate() {
                if col_map[j] != usize::MAX {
                    triplets.push((new_i, col_map[j], Dd { hi: v[k], lo: t[k] }));
                }
            }
        }
        Self::from_triplets_dd(rows.len(), cols.len(), triplets)
    }

    /// Places `blocks[r][c]` (when present) into a block matrix.
    pub fn block(blocks: &[Vec<Option<&Self>>]) -> Self {
        let row_sizes: Vec<usize> = blocks
            .iter()
            .map(|r| r.iter().flatten().next().expect("empty block row").nrows)
            .collect();
        let ncb = blocks[0].len();
        let col_sizes: Vec<usize> = (0..ncb)
            .map(|c| {
                blocks
                    .iter()
                    .find_map(|r| r[c].map(|m| m.ncols))
                    .expect("empty block column")
            })
            .collect();
        let mut triplets = Vec::new();
        let mut r0 = 0;
        for (r, row) in blocks.iter().enumerate() {
            let mut c0 = 0;
            for (c, m) in row.iter().enumerate() {
                if let Some(m) = m {
                    assert_eq!((m.nrows, m.ncols), (row_sizes[r], col_sizes[c]));
                    triplets.extend(m.iter_dd().map(|(i, j, v)| (r0 + i, c0 + j, v)));
                }
                c0 += col_sizes[c];
            }
            r0 += row_sizes[r];
        }
        Self::from_triplets_dd(r0, col_sizes.iter().sum(), triplets)
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry, with its location.
    pub fn symmetry_gap(&self) -> (f64, usize, usize) {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst = (0.0, 0, 0);
        for (i, j, v) in self.iter() {
            let gap = (v - self.get(j, i)).abs() / scale;
            if gap > worst.0 {
                worst = (gap, i, j);
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            d[(i, j)] = v;
        }
        d
    }

    /// Writes the matrix in Matrix Market coordinate format (1-based indices).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.iter() {
            writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}
