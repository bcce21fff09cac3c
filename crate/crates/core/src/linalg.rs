//! Sparse design matrix with paired row/column layouts, and the projection
//! and selection kernels shared by all solvers.
//!
//! Every kernel that touches matrix data returns the number of multiply-add
//! pairs it performed so solvers can meter their per-iteration cost.

use std::cmp::Ordering;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{check_len, Error, Result};

/// Compressed adjacency for one orientation of the matrix.
#[derive(Debug, Clone, PartialEq)]
struct Compressed {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl Compressed {
    fn slice(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.ptr[i], self.ptr[i + 1]);
        (&self.idx[lo..hi], &self.val[lo..hi])
    }
}

/// The data matrix `A` (n samples by d features), stored in both CSR and CSC
/// form so column slices (for `Ax` maintenance) and row slices (for `A^T y`
/// maintenance) are equally cheap. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDesignMatrix {
    n_rows: usize,
    n_cols: usize,
    rows: Compressed,
    cols: Compressed,
    row_norms_sq: Vec<f64>,
}

impl SparseDesignMatrix {
    /// Builds from per-row `(column, value)` lists. Column indices in each row
    /// must be strictly increasing and below `n_cols`. Explicit zeros are dropped.
    pub fn from_rows(n_cols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let n_rows = rows.len();
        let mut ptr = Vec::with_capacity(n_rows + 1);
        let mut idx = Vec::new();
        let mut val = Vec::new();
        ptr.push(0);
        for (i, row) in rows.iter().enumerate() {
            let mut prev: Option<usize> = None;
            for &(j, v) in row {
                if j >= n_cols {
                    return Err(Error::InvalidArgument(format!(
                        "row {i}: column {j} out of range for {n_cols} columns"
                    )));
                }
                if prev.is_some_and(|p| j <= p) {
                    return Err(Error::InvalidArgument(format!(
                        "row {i}: column indices not strictly increasing at {j}"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "row {i}: non-finite value at column {j}"
                    )));
                }
                prev = Some(j);
                if v != 0.0 {
                    idx.push(j);
                    val.push(v);
                }
            }
            ptr.push(idx.len());
        }
        Ok(Self::from_csr(n_rows, n_cols, Compressed { ptr, idx, val }))
    }

    /// Builds from a dense row-major buffer, dropping zeros.
    pub fn from_dense(n_rows: usize, n_cols: usize, data: &[f64]) -> Result<Self> {
        check_len("from_dense", n_rows * n_cols, data.len())?;
        let rows: Vec<Vec<(usize, f64)>> = data
            .chunks(n_cols.max(1))
            .take(n_rows)
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j, *v))
                    .collect()
            })
            .collect();
        let mut m = Self::from_rows(n_cols, &rows)?;
        m.n_rows = n_rows;
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| vec![(i, 1.0)]).collect();
        Self::from_rows(n, &rows).expect("identity is well formed")
    }

    fn from_csr(n_rows: usize, n_cols: usize, rows: Compressed) -> Self {
        // Counting-sort transpose; row order is preserved inside each column.
        let mut counts = vec![0usize; n_cols + 1];
        for &j in &rows.idx {
            counts[j + 1] += 1;
        }
        for j in 0..n_cols {
            counts[j + 1] += counts[j];
        }
        let col_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0usize; rows.idx.len()];
        let mut col_val = vec![0.0; rows.idx.len()];
        for i in 0..n_rows {
            let (ri, rv) = rows.slice(i);
            for (&j, &v) in ri.iter().zip(rv) {
                let p = next[j];
                col_idx[p] = i;
                col_val[p] = v;
                next[j] += 1;
            }
        }
        let row_norms_sq = (0..n_rows)
            .map(|i| rows.slice(i).1.iter().map(|v| v * v).sum())
            .collect();
        Self {
            n_rows,
            n_cols,
            rows,
            cols: Compressed {
                ptr: col_ptr,
                idx: col_idx,
                val: col_val,
            },
            row_norms_sq,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.rows.idx.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        self.rows.slice(i)
    }

    /// Row indices and values of column `j`.
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        self.cols.slice(j)
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.rows.ptr[i + 1] - self.rows.ptr[i]
    }

    pub fn col_nnz(&self, j: usize) -> usize {
        self.cols.ptr[j + 1] - self.cols.ptr[j]
    }

    pub fn row_norms_sq(&self) -> &[f64] {
        &self.row_norms_sq
    }

    /// `R = max_i ||a_i||^2`.
    pub fn max_row_norm_sq(&self) -> f64 {
        self.row_norms_sq.iter().copied().fold(0.0, f64::max)
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (idx, val) = self.row(i);
        idx.iter().zip(val).map(|(&j, &v)| v * x[j]).sum()
    }

    /// Dense `A x` via the row layout.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("mul_vec", self.n_cols, x.len())?;
        Ok((0..self.n_rows).map(|i| self.row_dot(i, x)).collect())
    }

    /// Dense `A^T y` via the column layout.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("tr_mul_vec", self.n_rows, y.len())?;
        Ok((0..self.n_cols)
            .map(|j| {
                let (idx, val) = self.col(j);
                idx.iter().zip(val).map(|(&i, &v)| v * y[i]).sum()
            })
            .collect())
    }

    /// Row-major dense copy built from the row layout.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows * self.n_cols];
        for i in 0..self.n_rows {
            let (idx, val) = self.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                out[i * self.n_cols + j] = v;
            }
        }
        out
    }

    /// Row-major dense copy built from the column layout.
    pub fn to_dense_from_cols(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows * self.n_cols];
        for j in 0..self.n_cols {
            let (idx, val) = self.col(j);
            for (&i, &v) in idx.iter().zip(val) {
                out[i * self.n_cols + j] = v;
            }
        }
        out
    }

    /// Returns a copy with row `i` multiplied by `factors[i]`.
    pub fn scale_rows(&self, factors: &[f64]) -> Result<Self> {
        check_len("scale_rows", self.n_rows, factors.len())?;
        let rows: Vec<Vec<(usize, f64)>> = (0..self.n_rows)
            .map(|i| {
                let (idx, val) = self.row(i);
                idx.iter()
                    .zip(val)
                    .map(|(&j, &v)| (j, v * factors[i]))
                    .collect()
            })
            .collect();
        let mut m = Self::from_rows(self.n_cols, &rows)?;
        m.n_rows = self.n_rows;
        Ok(m)
    }

    /// Upper estimate of `||A||_2^2` by power iteration on `A^T A` from a fixed
    /// pseudo-random start. The converged Rayleigh quotient is inflated by 1%
    /// since power iteration approaches the top eigenvalue from below.
    pub fn spectral_norm_sq(&self) -> f64 {
        if self.nnz() == 0 {
            return 0.0;
        }
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(0x5eed_5bec);
        let mut x: Vec<f64> = (0..self.n_cols)
            .map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 + 0.5)
            .collect();
        let mut est = 0.0;
        for _ in 0..500 {
            let nrm = norm2(&x);
            if nrm == 0.0 {
                break;
            }
            x.iter_mut().for_each(|v| *v /= nrm);
            let ax = self.mul_vec(&x).expect("dimensions agree");
            let next = self.tr_mul_vec(&ax).expect("dimensions agree");
            let rq = dot(&ax, &ax);
            x = next;
            if (rq - est).abs() <= 1e-10 * rq {
                est = rq;
                break;
            }
            est = rq;
        }
        est * 1.01
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// An s-sparse (or k-sparse) vector as sorted, unique `(index, value)` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseUpdate {
    entries: Vec<(usize, f64)>,
}

impl SparseUpdate {
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self> {
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidArgument(
                "sparse update indices must be strictly increasing".into(),
            ));
        }
        Ok(Self { entries })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }
}

/// Soft-threshold level `theta` such that `sum_i max(|v_i| - theta, 0) = radius`,
/// or `None` when `v` is already inside the ball.
fn l1_threshold(v: &[f64], radius: f64) -> Option<f64> {
    if norm1(v) <= radius {
        return None;
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in mags.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - radius) / (j + 1) as f64;
        if u > t {
            theta = t;
        } else {
            break;
        }
    }
    Some(theta.max(0.0))
}

/// Euclidean projection onto `{u : ||u||_1 <= radius}` (sort-based threshold).
pub fn project_l1_ball(v: &[f64], radius: f64) -> Result<Vec<f64>> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "l1 radius must be positive and finite, got {radius}"
        )));
    }
    let Some(theta) = l1_threshold(v, radius) else {
        return Ok(v.to_vec());
    };
    let mut out: Vec<f64> = v
        .iter()
        .map(|&x| x.signum() * (x.abs() - theta).max(0.0))
        .collect();
    // Rounding in the cumulative sum can leave the result a few ulps outside.
    let l1 = norm1(&out);
    if l1 > radius {
        let scale = radius / l1;
        out.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(out)
}

/// Indices of the `k` largest `|v_i|`, ties broken toward the lowest index,
/// returned in increasing order. Uses partial selection, not a full sort.
pub fn top_k_by_magnitude(v: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > v.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} out of range for length {}",
            v.len()
        )));
    }
    let mut idx: Vec<usize> = (0..v.len()).collect();
    if k < v.len() {
        idx.select_nth_unstable_by(k - 1, |&a, &b| {
            v[b].abs()
                .partial_cmp(&v[a].abs())
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        idx.truncate(k);
    }
    idx.sort_unstable();
    Ok(idx)
}

/// Exact minimizer of `||x - v||^2` over `{||x||_1 <= radius, ||x||_0 <= s}`:
/// keep the `s` largest magnitudes, then project that subvector onto the l1 ball.
pub fn sparse_l1_prox(v: &[f64], radius: f64, s: usize) -> Result<SparseUpdate> {
    if s == 0 || s > v.len() {
        return Err(Error::InvalidArgument(format!(
            "sparsity budget s = {s} out of range for length {}",
            v.len()
        )));
    }
    let support = top_k_by_magnitude(v, s)?;
    let sub: Vec<f64> = support.iter().map(|&i| v[i]).collect();
    let proj = project_l1_ball(&sub, radius)?;
    let entries = support
        .into_iter()
        .zip(proj)
        .filter(|(_, x)| *x != 0.0)
        .collect();
    Ok(SparseUpdate { entries })
}

/// `w <- scale_old * w + scale_new * A dx`, touching only the columns in the
/// support of `dx`. Returns the multiply-add count.
pub fn apply_sparse_col_product(
    a: &SparseDesignMatrix,
    dx: &SparseUpdate,
    w: &mut [f64],
    scale_old: f64,
    scale_new: f64,
) -> Result<u64> {
    check_len("apply_sparse_col_product (w)", a.n_rows(), w.len())?;
    if let Some(&(j, _)) = dx.entries().last() {
        if j >= a.n_cols() {
            return Err(Error::DimensionMismatch {
                context: "apply_sparse_col_product (dx index)",
                expected: a.n_cols(),
                actual: j + 1,
            });
        }
    }
    let mut flops = 0u64;
    if scale_old != 1.0 {
        w.iter_mut().for_each(|x| *x *= scale_old);
        flops += w.len() as u64;
    }
    for &(j, xj) in dx.entries() {
        let coef = scale_new * xj;
        let (idx, val) = a.col(j);
        for (&i, &v) in idx.iter().zip(val) {
            w[i] += coef * v;
        }
        flops += idx.len() as u64;
    }
    Ok(flops)
}

/// `z <- z + sum_{i in rows} dy_i a_i`, reading only the selected rows.
/// `dy[t]` pairs with `rows[t]`. Returns the multiply-add count.
pub fn apply_row_slice_transpose(
    a: &SparseDesignMatrix,
    rows: &[usize],
    dy: &[f64],
    z: &mut [f64],
) -> Result<u64> {
    check_len("apply_row_slice_transpose (z)", a.n_cols(), z.len())?;
    check_len("apply_row_slice_transpose (dy)", rows.len(), dy.len())?;
    let mut flops = 0u64;
    for (&i, &d) in rows.iter().zip(dy) {
        if i >= a.n_rows() {
            return Err(Error::DimensionMismatch {
                context: "apply_row_slice_transpose (row index)",
                expected: a.n_rows(),
                actual: i + 1,
            });
        }
        let (idx, val) = a.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            z[j] += d * v;
        }
        flops += idx.len() as u64;
    }
    Ok(flops)
}
