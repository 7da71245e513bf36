//! Sparse symmetric operators and an up-looking sparse Cholesky factor.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Square sparse matrix in sorted coordinate form (row-major, then column).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    n: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    symmetric: bool,
}

impl SparseOperator {
    /// Sums duplicate entries; the symmetry flag is computed, to `1e-14`
    /// relative to the largest entry.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|t| t.0 >= n || t.1 >= n) {
            return Err(Error::Shape(format!("entry ({r}, {c}) outside a {n}×{n} operator")));
        }
        if triplets.iter().any(|t| !t.2.is_finite()) {
            return Err(Error::InvalidParameter("non-finite operator entry".into()));
        }
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut rows = Vec::with_capacity(triplets.len());
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if rows.last() == Some(&r) && cols.last() == Some(&c) {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                cols.push(c);
                vals.push(v);
            }
        }
        let mut op = SparseOperator { n, rows, cols, vals, symmetric: false };
        op.symmetric = op.check_symmetry();
        Ok(op)
    }

    fn check_symmetry(&self) -> bool {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-14 * scale.max(f64::MIN_POSITIVE);
        (0..self.nnz()).all(|k| (self.vals[k] - self.get(self.cols[k], self.rows[k])).abs() <= tol)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nnz()).map(|k| (self.rows[k], self.cols[k], self.vals[k]))
    }

    fn row_range(&self, r: usize) -> std::ops::Range<usize> {
        let lo = self.rows.partition_point(|&x| x < r);
        let hi = self.rows.partition_point(|&x| x <= r);
        lo..hi
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_range(r);
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// Largest number of stored entries in any row.
    pub fn max_row_nnz(&self) -> usize {
        let mut best = 0;
        let mut k = 0;
        while k < self.nnz() {
            let r = self.rows[k];
            let start = k;
            while k < self.nnz() && self.rows[k] == r {
                k += 1;
            }
            best = best.max(k - start);
        }
        best
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for k in 0..self.nnz() {
            y[self.rows[k]] += self.vals[k] * x[self.cols[k]];
        }
        y
    }

    /// `self · other`.
    pub fn matmul(&self, other: &SparseOperator) -> Result<SparseOperator> {
        if self.n != other.n {
            return Err(Error::Shape("operator dimensions differ".into()));
        }
        let row_start = |op: &SparseOperator| -> Vec<usize> {
            let mut ptr = vec![0usize; op.n + 1];
            for &r in &op.rows {
                ptr[r + 1] += 1;
            }
            for i in 0..op.n {
                ptr[i + 1] += ptr[i];
            }
            ptr
        };
        let (pa, pb) = (row_start(self), row_start(other));
        let mut acc = vec![0.0; self.n];
        let mut mark = vec![usize::MAX; self.n];
        let mut touched = Vec::new();
        let mut out = Vec::new();
        for i in 0..self.n {
            touched.clear();
            for ka in pa[i]..pa[i + 1] {
                let (k, a) = (self.cols[ka], self.vals[ka]);
                for kb in pb[k]..pb[k + 1] {
                    let j = other.cols[kb];
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * other.vals[kb];
                }
            }
            for &j in &touched {
                out.push((i, j, acc[j]));
            }
        }
        SparseOperator::from_triplets(self.n, out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.vals.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `L Lᵀ = P Q Pᵀ` with `L` stored by columns, diagonal first in each column.
/// `perm[new] = old`.
#[derive(Clone, Debug)]
pub struct SparseCholesky {
    n: usize,
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
}

/// Permuted matrix in compressed-column form, both triangles.
struct Csc {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
}

fn permuted_csc(q: &SparseOperator, iperm: &[usize]) -> Csc {
    let n = q.dim();
    let mut ptr = vec![0usize; n + 1];
    for (_, c, _) in q.triplets() {
        ptr[iperm[c] + 1] += 1;
    }
    for i in 0..n {
        ptr[i + 1] += ptr[i];
    }
    let mut next = ptr.clone();
    let mut idx = vec![0; q.nnz()];
    let mut val = vec![0.0; q.nnz()];
    for (r, c, v) in q.triplets() {
        let col = iperm[c];
        idx[next[col]] = iperm[r];
        val[next[col]] = v;
        next[col] += 1;
    }
    Csc { ptr, idx, val }
}

/// Elimination tree from the upper triangle of a symmetric CSC matrix.
fn etree(a: &Csc, n: usize) -> Vec<usize> {
    const NONE: usize = usize::MAX;
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for p in a.ptr[k]..a.ptr[k + 1] {
            let mut i = a.idx[p];
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L` (columns `< k`), in topological order,
/// written to `stack[top..]`; returns `top`.
fn ereach(a: &Csc, k: usize, parent: &[usize], stack: &mut [usize], mark: &mut [usize]) -> usize {
    let n = stack.len();
    let mut top = n;
    mark[k] = k;
    for p in a.ptr[k]..a.ptr[k + 1] {
        let mut i = a.idx[p];
        if i > k {
            continue;
        }
        let mut len = 0;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

impl SparseCholesky {
    /// Symbolic and numeric factorization of `P Q Pᵀ`.
    pub fn factorize(q: &SparseOperator, perm: &[usize]) -> Result<Self> {
        let n = q.dim();
        if perm.len() != n {
            return Err(Error::Shape(format!("permutation has length {}, operator {n}", perm.len())));
        }
        if !q.is_symmetric() {
            return Err(Error::InvalidParameter("Cholesky needs a symmetric operator".into()));
        }
        let mut iperm = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            if old >= n || iperm[old] != usize::MAX {
                return Err(Error::InvalidParameter("ordering is not a permutation".into()));
            }
            iperm[old] = new;
        }
        let a = permuted_csc(q, &iperm);
        let parent = etree(&a, n);

        let mut stack = vec![0usize; n];
        let mut mark = vec![usize::MAX; n];
        let mut counts = vec![1usize; n];
        for k in 0..n {
            let top = ereach(&a, k, &parent, &mut stack, &mut mark);
            for &j in &stack[top..] {
                counts[j] += 1;
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            col_ptr[j + 1] = col_ptr[j] + counts[j];
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut vals = vec![0.0; nnz];
        // next free slot per column; slot col_ptr[j] is reserved for the diagonal
        let mut next: Vec<usize> = (0..n).map(|j| col_ptr[j] + 1).collect();
        let mut x = vec![0.0; n];
        mark.iter_mut().for_each(|m| *m = usize::MAX);

        for k in 0..n {
            let top = ereach(&a, k, &parent, &mut stack, &mut mark);
            for p in a.ptr[k]..a.ptr[k + 1] {
                let i = a.idx[p];
                if i <= k {
                    x[i] += a.val[p];
                }
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / vals[col_ptr[i]];
                x[i] = 0.0;
                for p in col_ptr[i] + 1..next[i] {
                    x[row_idx[p]] -= vals[p] * lki;
                }
                d -= lki * lki;
                row_idx[next[i]] = k;
                vals[next[i]] = lki;
                next[i] += 1;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { index: k, pivot: d });
            }
            row_idx[col_ptr[k]] = k;
            vals[col_ptr[k]] = d.sqrt();
        }
        Ok(SparseCholesky { n, perm: perm.to_vec(), col_ptr, row_idx, vals })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored nonzeros of `L`, diagonal included.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|j| self.vals[self.col_ptr[j]].ln()).sum::<f64>()
    }

    /// `L` as a dense matrix (tests and small diagnostics).
    pub fn factor_dense(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                l[(self.row_idx[p], j)] = self.vals[p];
            }
        }
        l
    }

    fn lower_solve(&self, y: &mut [f64]) {
        for j in 0..self.n {
            let start = self.col_ptr[j];
            y[j] /= self.vals[start];
            let yj = y[j];
            for p in start + 1..self.col_ptr[j + 1] {
                y[self.row_idx[p]] -= self.vals[p] * yj;
            }
        }
    }

    fn upper_solve(&self, y: &mut [f64]) {
        for j in (0..self.n).rev() {
            let start = self.col_ptr[j];
            let mut acc = y[j];
            for p in start + 1..self.col_ptr[j + 1] {
                acc -= self.vals[p] * y[self.row_idx[p]];
            }
            y[j] = acc / self.vals[start];
        }
    }

    /// `Q⁻¹ b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        self.lower_solve(&mut y);
        self.upper_solve(&mut y);
        let mut x = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// `Pᵀ L⁻ᵀ z`: a draw from `N(0, Q⁻¹)` for standard normal `z`.
    pub fn sample_from(&self, mut z: Vec<f64>) -> Vec<f64> {
        self.upper_solve(&mut z);
        let mut x = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = z[new];
        }
        x
    }

    fn lookup(&self, sigma: &[f64], r: usize, c: usize) -> f64 {
        let (row, col) = if r >= c { (r, c) } else { (c, r) };
        let range = self.col_ptr[col]..self.col_ptr[col + 1];
        // rows are increasing within a column
        let k = self.row_idx[range.clone()].binary_search(&row).expect("entry on the filled pattern");
        sigma[range.start + k]
    }

    /// Diagonal of `Q⁻¹` (original ordering) by the Takahashi recursion on
    /// the pattern of `L`, without forming the inverse.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        let mut sigma = vec![0.0; self.nnz()];
        for j in (0..self.n).rev() {
            let start = self.col_ptr[j];
            let end = self.col_ptr[j + 1];
            let ljj = self.vals[start];
            for p in (start + 1..end).rev() {
                let i = self.row_idx[p];
                let mut acc = 0.0;
                for q in start + 1..end {
                    acc += self.vals[q] * self.lookup(&sigma, i, self.row_idx[q]);
                }
                sigma[p] = -acc / ljj;
            }
            let mut acc = 0.0;
            for q in start + 1..end {
                acc += self.vals[q] * sigma[q];
            }
            sigma[start] = (1.0 / ljj - acc) / ljj;
        }
        let mut diag = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            diag[old] = sigma[self.col_ptr[new]];
        }
        diag
    }
}
