//! Dense and compressed-sparse-row matrix kernels.
//!
//! `CsrMatrix` is the storage for both the sparse quadratic Hessians and the
//! Kaczmarz system matrix; symmetric Hessians are stored fully (both
//! triangles) so that a column slice is just a row slice.

use crate::error::{CdError, Result};
use crate::rng::{standard_normal_vec, SplitRng};

pub type DenseVector = Vec<f64>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist2_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn ensure_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(CdError::InvalidParameter("vector has non-finite entries".into()))
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from raw CSR arrays, validating the structural invariants:
    /// nondecreasing offsets ending at nnz, and strictly increasing in-range
    /// column indices within each row.
    pub fn new(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != nrows + 1 {
            return Err(CdError::InvalidMatrix(format!(
                "row_offsets length {} != nrows+1 = {}",
                row_offsets.len(),
                nrows + 1
            )));
        }
        if row_offsets[0] != 0 || *row_offsets.last().unwrap() != col_indices.len() {
            return Err(CdError::InvalidMatrix(
                "row_offsets must start at 0 and end at nnz".into(),
            ));
        }
        if col_indices.len() != values.len() {
            return Err(CdError::InvalidMatrix("col_indices/values length mismatch".into()));
        }
        for i in 0..nrows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return Err(CdError::InvalidMatrix(format!("row_offsets decrease at row {i}")));
            }
            let cols = &col_indices[lo..hi];
            for w in cols.windows(2) {
                if w[0] >= w[1] {
                    return Err(CdError::InvalidMatrix(format!(
                        "columns not strictly increasing in row {i}"
                    )));
                }
            }
            if let Some(&last) = cols.last() {
                if last >= ncols {
                    return Err(CdError::InvalidMatrix(format!(
                        "column index {last} out of range in row {i}"
                    )));
                }
            }
        }
        Ok(CsrMatrix { nrows, ncols, row_offsets, col_indices, values })
    }

    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut cells: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(i, j, _) in &cells {
            if i >= nrows || j >= ncols {
                return Err(CdError::InvalidMatrix(format!("entry ({i},{j}) out of bounds")));
            }
        }
        cells.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_offsets = vec![0usize; nrows + 1];
        let mut col_indices = Vec::with_capacity(cells.len());
        let mut values = Vec::with_capacity(cells.len());
        for (i, j, v) in cells {
            // row_offsets[i+1] holds a running per-row count until the prefix sum
            col_indices.push(j);
            values.push(v);
            row_offsets[i + 1] += 1;
        }
        for i in 0..nrows {
            row_offsets[i + 1] += row_offsets[i];
        }
        // merge duplicates (sorted order guarantees adjacency within a row)
        let mut merged_offsets = vec![0usize; nrows + 1];
        let mut merged_cols = Vec::with_capacity(col_indices.len());
        let mut merged_vals = Vec::with_capacity(values.len());
        for i in 0..nrows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            let mut j = lo;
            while j < hi {
                let col = col_indices[j];
                let mut v = values[j];
                let mut jj = j + 1;
                while jj < hi && col_indices[jj] == col {
                    v += values[jj];
                    jj += 1;
                }
                merged_cols.push(col);
                merged_vals.push(v);
                j = jj;
            }
            merged_offsets[i + 1] = merged_cols.len();
        }
        CsrMatrix::new(nrows, ncols, merged_offsets, merged_cols, merged_vals)
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
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    pub fn max_row_nnz(&self) -> usize {
        (0..self.nrows).map(|i| self.row_nnz(i)).max().unwrap_or(0)
    }

    /// Entry (i, j) by binary search within row `i`; absent entries are zero.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    /// Dot product of row `i` with a dense vector.
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
    }

    /// `y += scale * (row i)^T`, scattering into a dense vector.
    pub fn add_scaled_row_into(&self, i: usize, scale: f64, y: &mut [f64]) {
        let (cols, vals) = self.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            y[j] += scale * v;
        }
    }

    pub fn row_norm2(&self, i: usize) -> f64 {
        let (_, vals) = self.row(i);
        dot(vals, vals).sqrt()
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            y[i] = self.row_dot(i, x);
        }
    }

    /// `y = A^T x`.
    pub fn mul_transpose_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        y.fill(0.0);
        for i in 0..self.nrows {
            self.add_scaled_row_into(i, x[i], y);
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let w = self.get(j, i);
                if (v - w).abs() > rel_tol * (1.0 + v.abs().max(w.abs())) {
                    return false;
                }
            }
        }
        true
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }
}

/// Dense symmetric matrix, stored fully in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseSymMatrix {
    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(CdError::InvalidMatrix(format!(
                "dense data length {} != n^2 = {}",
                data.len(),
                n * n
            )));
        }
        Ok(DenseSymMatrix { n, data })
    }

    pub fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(CdError::InvalidMatrix("matrix is not square".into()));
        }
        let n = m.nrows();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = m[(i, j)];
            }
        }
        Ok(DenseSymMatrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let (a, b) = (self.get(i, j), self.get(j, i));
                if (a - b).abs() > rel_tol * (1.0 + a.abs().max(b.abs())) {
                    return false;
                }
            }
        }
        true
    }
}

/// Hessian storage for quadratic objectives: symmetric dense or CSR.
#[derive(Debug, Clone)]
pub enum QuadMatrix {
    Dense(DenseSymMatrix),
    Sparse(CsrMatrix),
}

impl QuadMatrix {
    pub fn dim(&self) -> usize {
        match self {
            QuadMatrix::Dense(m) => m.n(),
            QuadMatrix::Sparse(m) => m.nrows(),
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        match self {
            QuadMatrix::Dense(m) => m.get(i, i),
            QuadMatrix::Sparse(m) => m.get(i, i),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            QuadMatrix::Dense(m) => m.get(i, j),
            QuadMatrix::Sparse(m) => m.get(i, j),
        }
    }

    /// Nonzeros touched when updating coordinate `i` (column sparsity).
    pub fn col_nnz(&self, i: usize) -> usize {
        match self {
            QuadMatrix::Dense(m) => m.n(),
            QuadMatrix::Sparse(m) => m.row_nnz(i),
        }
    }

    /// `y += scale * Q e_i`. Relies on symmetry: column i equals row i.
    pub fn add_scaled_col_into(&self, i: usize, scale: f64, y: &mut [f64]) {
        match self {
            QuadMatrix::Dense(m) => {
                for (yj, &qij) in y.iter_mut().zip(m.row(i)) {
                    *yj += scale * qij;
                }
            }
            QuadMatrix::Sparse(m) => m.add_scaled_row_into(i, scale, y),
        }
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        match self {
            QuadMatrix::Dense(m) => dot(m.row(i), x),
            QuadMatrix::Sparse(m) => m.row_dot(i, x),
        }
    }

    /// `y = Q x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        match self {
            QuadMatrix::Dense(m) => {
                for i in 0..m.n() {
                    y[i] = dot(m.row(i), x);
                }
            }
            QuadMatrix::Sparse(m) => m.mul_vec(x, y),
        }
    }

    /// `x^T Q x / 2 - b^T x`, computed from scratch.
    pub fn quadratic_value(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut qx = vec![0.0; x.len()];
        self.mul_vec(x, &mut qx);
        0.5 * dot(x, &qx) - dot(b, x)
    }

    /// Column 2-norms (for the restricted Lipschitz constant).
    pub fn col_norms(&self) -> Vec<f64> {
        let n = self.dim();
        let mut acc = vec![0.0; n];
        match self {
            QuadMatrix::Dense(m) => {
                for i in 0..n {
                    for (j, &v) in m.row(i).iter().enumerate() {
                        acc[j] += v * v;
                    }
                }
            }
            QuadMatrix::Sparse(m) => {
                for (_, j, v) in m.iter_entries() {
                    acc[j] += v * v;
                }
            }
        }
        acc.iter().map(|a| a.sqrt()).collect()
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        match self {
            QuadMatrix::Dense(m) => m.is_symmetric(rel_tol),
            QuadMatrix::Sparse(m) => m.is_symmetric(rel_tol),
        }
    }

    pub fn to_dense_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        match self {
            QuadMatrix::Dense(m) => m.to_nalgebra(),
            QuadMatrix::Sparse(m) => m.to_dense(),
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            QuadMatrix::Dense(m) => m.n() * m.n(),
            QuadMatrix::Sparse(m) => m.nnz(),
        }
    }
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
///
/// Deterministic: the start vector comes from a fixed-key generator. Stops
/// when the Rayleigh quotient is stable to `rel_tol` or after `max_iter`
/// passes.
pub fn power_iteration_lmax(q: &QuadMatrix, rel_tol: f64, max_iter: usize) -> f64 {
    let n = q.dim();
    if n == 0 {
        return 0.0;
    }
    let mut rng = SplitRng::new(0x9e37_79b9_7f4a_7c15);
    let mut v = standard_normal_vec(&mut rng, n);
    let nv = norm2(&v);
    if nv == 0.0 {
        return 0.0;
    }
    v.iter_mut().for_each(|x| *x /= nv);
    let mut u = vec![0.0; n];
    let mut lambda_prev = 0.0;
    for _ in 0..max_iter {
        q.mul_vec(&v, &mut u);
        let lambda = dot(&v, &u);
        let nu = norm2(&u);
        if nu == 0.0 {
            return 0.0;
        }
        for (vi, ui) in v.iter_mut().zip(&u) {
            *vi = ui / nu;
        }
        if (lambda - lambda_prev).abs() <= rel_tol * lambda.abs().max(f64::MIN_POSITIVE) {
            return lambda;
        }
        lambda_prev = lambda;
    }
    lambda_prev
}
