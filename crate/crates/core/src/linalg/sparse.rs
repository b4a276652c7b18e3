use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::{CMatrix, C64};

/// Compressed sparse row matrix over `C64`. Entries that are exactly zero are
/// never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![C64::new(1.0, 0.0); n])
    }

    pub fn diagonal(d: &[C64]) -> Self {
        Self::from_triplets(d.len(), d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    pub fn diagonal_real(d: &[f64]) -> Self {
        Self::from_triplets(
            d.len(),
            d.len(),
            d.iter().enumerate().map(|(i, &v)| (i, i, C64::new(v, 0.0))),
        )
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
    ) -> Self {
        let mut t: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<C64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_of = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            assert!(r < rows && c < cols, "triplet out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                row_of.push(r);
                last = Some((r, c));
            }
        }
        let mut out_idx = Vec::with_capacity(indices.len());
        let mut out_val = Vec::with_capacity(values.len());
        for k in 0..indices.len() {
            if values[k] != C64::new(0.0, 0.0) {
                indptr[row_of[k] + 1] += 1;
                out_idx.push(indices[k]);
                out_val.push(values[k]);
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            rows,
            cols,
            indptr,
            indices: out_idx,
            values: out_val,
        }
    }

    pub fn from_dense(m: &CMatrix) -> Self {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != C64::new(0.0, 0.0) {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.iter() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[C64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let (idx, val) = self.row(i);
        match idx.binary_search(&j) {
            Ok(k) => val[k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (idx, val) = self.row(i);
            idx.iter().zip(val.iter()).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn scale(&self, alpha: C64) -> Self {
        if alpha == C64::new(0.0, 0.0) {
            return Self::zeros(self.rows, self.cols);
        }
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v *= alpha;
        }
        out
    }

    /// Entrywise division; `x / x` is exactly one.
    pub fn div_scalar(&self, v: C64) -> Self {
        let mut out = self.clone();
        for x in out.values.iter_mut() {
            *x /= v;
        }
        out
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: C64, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in add");
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.rows {
            let (ai, av) = self.row(i);
            let (bi, bv) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ai.len() || q < bi.len() {
                let (j, v) = if q == bi.len() || (p < ai.len() && ai[p] < bi[q]) {
                    p += 1;
                    (ai[p - 1], av[p - 1])
                } else if p == ai.len() || bi[q] < ai[p] {
                    q += 1;
                    (bi[q - 1], alpha * bv[q - 1])
                } else {
                    p += 1;
                    q += 1;
                    (ai[p - 1], av[p - 1] + alpha * bv[q - 1])
                };
                if v != C64::new(0.0, 0.0) {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr[i + 1] = indices.len();
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(C64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(C64::new(-1.0, 0.0), other)
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "shape mismatch in product");
        let mut acc = vec![C64::new(0.0, 0.0); other.cols];
        let mut mark = vec![usize::MAX; other.cols];
        let mut touched: Vec<usize> = Vec::new();
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.rows {
            touched.clear();
            let (ai, av) = self.row(i);
            for (&k, &a) in ai.iter().zip(av) {
                let (bi, bv) = other.row(k);
                for (&j, &b) in bi.iter().zip(bv) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = C64::new(0.0, 0.0);
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in touched.iter() {
                if acc[j] != C64::new(0.0, 0.0) {
                    indices.push(j);
                    values.push(acc[j]);
                }
            }
            indptr[i + 1] = indices.len();
        }
        Self {
            rows: self.rows,
            cols: other.cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.mul(other).sub(&other.mul(self))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.cols, self.rows, self.iter().map(|(i, j, v)| (j, i, v.conj())))
    }

    /// Kronecker product, `self` acting on the slow (outer) index.
    pub fn kron(&self, other: &Self) -> Self {
        let (r2, c2) = other.shape();
        let mut t = Vec::with_capacity(self.nnz() * other.nnz());
        for (i, j, a) in self.iter() {
            for (k, l, b) in other.iter() {
                t.push((i * r2 + k, j * c2 + l, a * b));
            }
        }
        Self::from_triplets(self.rows * r2, self.cols * c2, t)
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| v.norm_sqr()).sum::<f64>())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `sum_i A_ii w_i`.
    pub fn trace_weighted(&self, w: &[f64]) -> C64 {
        assert_eq!(w.len(), self.rows.min(self.cols));
        (0..w.len()).map(|i| self.get(i, i) * w[i]).sum()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// `Tr(A^* B W)` with `W = diag(w)`.
    pub fn inner_weighted(&self, other: &Self, w: &[f64]) -> C64 {
        assert_eq!(self.shape(), other.shape());
        let mut s = C64::new(0.0, 0.0);
        for i in 0..self.rows {
            let (ai, av) = self.row(i);
            let (bi, bv) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ai.len() && q < bi.len() {
                if ai[p] < bi[q] {
                    p += 1;
                } else if bi[q] < ai[p] {
                    q += 1;
                } else {
                    s += av[p].conj() * bv[q] * w[ai[p]];
                    p += 1;
                    q += 1;
                }
            }
        }
        s
    }

    /// Set of `col - row` offsets carrying nonzero entries.
    pub fn diagonal_offsets(&self) -> BTreeSet<i64> {
        self.iter().map(|(i, j, _)| j as i64 - i as i64).collect()
    }

    /// Largest `|col - row|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.iter()
            .map(|(i, j, _)| (j as i64 - i as i64).unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.shape() == other.shape() && self.sub(other).max_abs() <= tol
    }

    pub(crate) fn content_hash(&self) -> u64 {
        super::fnv(
            [self.rows as u64, self.cols as u64]
                .into_iter()
                .chain(self.indptr.iter().map(|&x| x as u64))
                .chain(self.indices.iter().map(|&x| x as u64))
                .chain(self.values.iter().flat_map(|v| [v.re.to_bits(), v.im.to_bits()])),
        )
    }

    /// Keeps the entries whose row satisfies `keep`.
    pub fn restrict_rows(&self, keep: impl Fn(usize) -> bool) -> Self {
        Self::from_triplets(self.rows, self.cols, self.iter().filter(|(i, _, _)| keep(*i)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, re};

    fn shift(n: usize) -> SparseMatrix {
        SparseMatrix::from_triplets(n, n, (1..n).map(|i| (i, i - 1, re(1.0))))
    }

    #[test]
    fn product_matches_dense() {
        let a = SparseMatrix::from_triplets(3, 3, [(0, 1, c64(1., 2.)), (2, 0, re(3.)), (1, 1, re(-1.))]);
        let b = shift(3).add(&SparseMatrix::identity(3).scale(c64(0., 1.)));
        let dense = a.to_dense() * b.to_dense();
        assert!((a.mul(&b).to_dense() - dense).norm() < 1e-14);
    }

    #[test]
    fn kron_matches_dense() {
        let a = shift(2).add(&SparseMatrix::identity(2));
        let b = SparseMatrix::from_triplets(3, 3, [(0, 2, c64(0., 1.)), (1, 1, re(2.))]);
        let k = a.kron(&b).to_dense();
        let (da, db) = (a.to_dense(), b.to_dense());
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..3 {
                    for q in 0..3 {
                        assert_eq!(k[(i * 3 + p, j * 3 + q)], da[(i, j)] * db[(p, q)]);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_sums_are_not_stored() {
        let a = SparseMatrix::identity(4);
        assert!(a.sub(&a).is_zero());
        let d = SparseMatrix::from_triplets(2, 2, [(0, 0, re(1.)), (0, 0, re(-1.))]);
        assert_eq!(d.nnz(), 0);
    }

    #[test]
    fn weighted_inner_product_is_trace_formula() {
        let a = SparseMatrix::from_triplets(3, 3, [(0, 1, c64(1., 1.)), (2, 2, re(2.))]);
        let b = SparseMatrix::from_triplets(3, 3, [(0, 1, re(3.)), (2, 2, c64(0., 1.)), (1, 0, re(5.))]);
        let w = [0.5, 0.25, 2.0];
        let wd = SparseMatrix::diagonal_real(&w).to_dense();
        let expect = (a.to_dense().adjoint() * b.to_dense() * wd).trace();
        assert!((a.inner_weighted(&b, &w) - expect).norm() < 1e-14);
    }

    #[test]
    fn adjoint_and_offsets() {
        let s = shift(5);
        assert_eq!(s.adjoint().diagonal_offsets().into_iter().collect::<Vec<_>>(), vec![1]);
        assert_eq!(s.bandwidth(), 1);
        assert!(s.mul(&s.adjoint()).approx_eq(
            &SparseMatrix::from_triplets(5, 5, (1..5).map(|i| (i, i, re(1.)))),
            0.0
        ));
    }
}
