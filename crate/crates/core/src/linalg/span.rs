use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::{CMatrix, SparseMatrix, C64};
use crate::error::{Error, Result};

pub const DEFAULT_RANK_TOL: f64 = 1e-9;

const SKETCH_SEED: u64 = 0x5eed_0f5a_11c0_ffee;

/// A vectorized operator: sorted coordinates `row * cols + col` and values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVec {
    pub idx: Vec<u64>,
    pub val: Vec<C64>,
}

impl SparseVec {
    pub fn from_matrix(m: &SparseMatrix, keep_row: impl Fn(usize) -> bool) -> Self {
        let cols = m.ncols() as u64;
        let mut out = Self::default();
        for (i, j, v) in m.iter() {
            if keep_row(i) {
                out.idx.push(i as u64 * cols + j as u64);
                out.val.push(v);
            }
        }
        out
    }

    pub fn from_dense(m: &CMatrix) -> Self {
        Self::from_matrix(&SparseMatrix::from_dense(m), |_| true)
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn is_zero(&self) -> bool {
        self.val.iter().all(|v| *v == C64::new(0.0, 0.0))
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.val.iter().map(|v| v.norm_sqr()).sum::<f64>())
    }

    pub fn max_abs(&self) -> f64 {
        self.val.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, a: C64) -> Self {
        Self {
            idx: self.idx.clone(),
            val: self.val.iter().map(|v| v * a).collect(),
        }
    }

    /// `sum_i c_i v_i`, dropping exact zeros.
    pub fn combination(vs: &[&SparseVec], coeffs: &[C64]) -> Self {
        let mut acc: BTreeMap<u64, C64> = BTreeMap::new();
        for (v, &c) in vs.iter().zip(coeffs) {
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            for (&i, &x) in v.idx.iter().zip(&v.val) {
                *acc.entry(i).or_insert(C64::new(0.0, 0.0)) += c * x;
            }
        }
        let mut out = Self::default();
        for (i, x) in acc {
            if x != C64::new(0.0, 0.0) {
                out.idx.push(i);
                out.val.push(x);
            }
        }
        out
    }

    pub fn sub(&self, other: &SparseVec) -> Self {
        Self::combination(&[self, other], &[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)])
    }

    /// Splits into the part on coordinates where `pred` holds and the rest.
    pub fn split(&self, pred: impl Fn(u64) -> bool) -> (Self, Self) {
        let (mut a, mut b) = (Self::default(), Self::default());
        for (&i, &x) in self.idx.iter().zip(&self.val) {
            let t = if pred(i) { &mut a } else { &mut b };
            t.idx.push(i);
            t.val.push(x);
        }
        (a, b)
    }
}

/// Drops zero vectors and vectors proportional to an earlier one; the span
/// is unchanged.
pub fn dedup_proportional(vs: &[SparseVec]) -> Vec<usize> {
    let mut buckets: BTreeMap<(Vec<u64>, Vec<(i64, i64)>), Vec<usize>> = BTreeMap::new();
    let mut normalized: Vec<Option<SparseVec>> = Vec::with_capacity(vs.len());
    let mut keep = Vec::new();
    for (i, v) in vs.iter().enumerate() {
        let Some(lead) = v.val.iter().copied().find(|x| x.norm() > 0.0) else {
            normalized.push(None);
            continue;
        };
        let n = v.scale(C64::new(1.0, 0.0) / lead);
        let key = (
            n.idx.clone(),
            n.val
                .iter()
                .map(|x| (libm::round(x.re * 1e8) as i64, libm::round(x.im * 1e8) as i64))
                .collect(),
        );
        let bucket = buckets.entry(key).or_default();
        let dup = bucket.iter().any(|&j| {
            let o = normalized[j].as_ref().unwrap();
            o.val.iter().zip(&n.val).all(|(a, b)| (a - b).norm() <= 1e-12 * (1.0 + a.norm()))
        });
        if !dup {
            bucket.push(i);
            keep.push(i);
        }
        normalized.push(Some(n));
    }
    keep
}

/// `out_j = sum_i coeffs[(i, j)] v_i` for every column `j`, accumulated on the
/// union support.
pub fn combine_columns(vs: &[SparseVec], coeffs: &DMatrix<C64>) -> Vec<SparseVec> {
    assert_eq!(vs.len(), coeffs.nrows());
    let mut support: Vec<u64> = vs.iter().flat_map(|v| v.idx.iter().copied()).collect();
    support.sort_unstable();
    support.dedup();
    let pos: Vec<Vec<usize>> = vs
        .iter()
        .map(|v| v.idx.iter().map(|i| support.binary_search(i).unwrap()).collect())
        .collect();
    let mut acc = vec![C64::new(0.0, 0.0); support.len()];
    let mut out = Vec::with_capacity(coeffs.ncols());
    for j in 0..coeffs.ncols() {
        for a in acc.iter_mut() {
            *a = C64::new(0.0, 0.0);
        }
        for (i, v) in vs.iter().enumerate() {
            let c = coeffs[(i, j)];
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            for (p, x) in pos[i].iter().zip(&v.val) {
                acc[*p] += c * x;
            }
        }
        let mut r = SparseVec::default();
        for (k, a) in acc.iter().enumerate() {
            if *a != C64::new(0.0, 0.0) {
                r.idx.push(support[k]);
                r.val.push(*a);
            }
        }
        out.push(r);
    }
    out
}

/// Consistent dense coordinates for several groups of sparse vectors: the
/// exact union support when it is small, otherwise a Rademacher sketch keyed
/// by coordinate.
pub struct Embedding {
    pub groups: Vec<DMatrix<C64>>,
    pub sketched: bool,
}

pub fn embed(groups: &[&[SparseVec]]) -> Embedding {
    let mut support: Vec<u64> = groups
        .iter()
        .flat_map(|g| g.iter().flat_map(|v| v.idx.iter().copied()))
        .collect();
    support.sort_unstable();
    support.dedup();
    let total: usize = groups.iter().map(|g| g.len()).sum();
    let bound = total.min(support.len());
    let k_sketch = 2 * bound + 16;
    if support.len() <= k_sketch {
        let out = groups
            .iter()
            .map(|g| {
                let mut m = DMatrix::zeros(g.len(), support.len());
                for (r, v) in g.iter().enumerate() {
                    for (i, x) in v.idx.iter().zip(&v.val) {
                        let c = support.binary_search(i).unwrap();
                        m[(r, c)] = *x;
                    }
                }
                m
            })
            .collect();
        return Embedding {
            groups: out,
            sketched: false,
        };
    }
    let k = k_sketch;
    let scale = 1.0 / libm::sqrt(k as f64);
    let mut by_coord: BTreeMap<u64, Vec<(usize, usize, C64)>> = BTreeMap::new();
    for (gi, g) in groups.iter().enumerate() {
        for (r, v) in g.iter().enumerate() {
            for (i, x) in v.idx.iter().zip(&v.val) {
                by_coord.entry(*i).or_default().push((gi, r, *x));
            }
        }
    }
    let mut out: Vec<DMatrix<C64>> = groups.iter().map(|g| DMatrix::zeros(g.len(), k)).collect();
    let words = k.div_ceil(64);
    let mut bits = vec![0u64; words];
    for (coord, entries) in by_coord {
        let mut rng = ChaCha8Rng::seed_from_u64(SKETCH_SEED ^ coord.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        for b in bits.iter_mut() {
            *b = rng.next_u64();
        }
        for (gi, r, x) in entries {
            let xs = x * scale;
            let m = &mut out[gi];
            for j in 0..k {
                if (bits[j / 64] >> (j % 64)) & 1 == 1 {
                    m[(r, j)] += xs;
                } else {
                    m[(r, j)] -= xs;
                }
            }
        }
    }
    Embedding {
        groups: out,
        sketched: true,
    }
}

/// Numerical rank summary.
#[derive(Clone, Debug, PartialEq)]
pub struct RankReport {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub cutoff: f64,
    /// Some singular value lies within a factor 10 of the cutoff.
    pub marginal: bool,
    pub sketched: bool,
}

fn normalized_rows(a: &DMatrix<C64>) -> (DMatrix<C64>, Vec<f64>) {
    let mut m = a.clone();
    let mut norms = Vec::with_capacity(a.nrows());
    for r in 0..a.nrows() {
        let n = a.row(r).norm();
        norms.push(n);
        if n > 0.0 {
            let mut row = m.row_mut(r);
            row /= C64::new(n, 0.0);
        }
    }
    (m, norms)
}

fn sorted_singular_values(a: &DMatrix<C64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Rank of the rows of a dense matrix, rows normalized first.
pub fn dense_rank(a: &DMatrix<C64>, tol: f64, sketched: bool) -> RankReport {
    let (m, _) = normalized_rows(a);
    let s = sorted_singular_values(&m);
    let smax = s.first().copied().unwrap_or(0.0);
    let cutoff = tol * smax;
    let rank = s.iter().filter(|&&x| x > cutoff && x > 0.0).count();
    let marginal = smax > 0.0 && s.iter().any(|&x| x > cutoff / 10.0 && x <= cutoff * 10.0);
    RankReport {
        rank,
        singular_values: s,
        cutoff,
        marginal,
        sketched,
    }
}

/// Basis of `{c : sum_i c_i row_i = 0}` as columns of the returned matrix.
pub fn dense_left_null(a: &DMatrix<C64>, tol: f64) -> DMatrix<C64> {
    let m = a.nrows();
    if m == 0 {
        return DMatrix::zeros(0, 0);
    }
    let (mut b, norms) = normalized_rows(a);
    if b.ncols() < m {
        b = b.resize_horizontally(m, C64::new(0.0, 0.0));
    }
    let svd = b.svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = tol * smax;
    let mut cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&j| svd.singular_values[j] <= cutoff || smax == 0.0)
        .collect();
    cols.sort_unstable();
    let mut out = DMatrix::zeros(m, cols.len());
    for (k, &j) in cols.iter().enumerate() {
        for i in 0..m {
            let scale = if norms[i] > 0.0 { 1.0 / norms[i] } else { 1.0 };
            out[(i, k)] = u[(i, j)].conj() * scale;
        }
    }
    orthonormalize_columns(&out)
}

/// Orthonormal basis of the column space.
pub fn orthonormalize_columns(a: &DMatrix<C64>) -> DMatrix<C64> {
    if a.ncols() == 0 {
        return a.clone();
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.unwrap();
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&j| svd.singular_values[j] > 1e-12 * smax)
        .collect();
    let mut out = DMatrix::zeros(a.nrows(), keep.len());
    for (k, &j) in keep.iter().enumerate() {
        out.set_column(k, &u.column(j));
    }
    out
}

/// Indices of `rank` rows chosen by column-pivoted QR of the normalized rows.
pub fn dense_independent(a: &DMatrix<C64>, tol: f64) -> Vec<usize> {
    let r = dense_rank(a, tol, false).rank;
    if r == 0 {
        return Vec::new();
    }
    let (m, _) = normalized_rows(a);
    let qr = m.transpose().col_piv_qr();
    let mut order = DMatrix::<f64>::from_fn(1, a.nrows(), |_, j| j as f64);
    qr.p().permute_columns(&mut order);
    let mut picked: Vec<usize> = (0..r).map(|j| order[(0, j)] as usize).collect();
    picked.sort_unstable();
    picked
}

pub fn rank_of(members: &[SparseVec], tol: f64) -> RankReport {
    let e = embed(&[members]);
    dense_rank(&e.groups[0], tol, e.sketched)
}

/// Basis of linear relations among `members`, one coefficient vector each.
pub fn left_null(members: &[SparseVec], tol: f64) -> Vec<Vec<C64>> {
    let e = embed(&[members]);
    let n = dense_left_null(&e.groups[0], tol);
    (0..n.ncols()).map(|j| n.column(j).iter().copied().collect()).collect()
}

/// Indices of a maximal independent subset of `members`.
pub fn independent_subset(members: &[SparseVec], tol: f64) -> Vec<usize> {
    let e = embed(&[members]);
    dense_independent(&e.groups[0], tol)
}

/// A finite family of operators of one shape, evaluated at one level.
#[derive(Clone, Debug)]
pub struct OperatorSpan {
    pub level: usize,
    pub shape: (usize, usize),
    pub tol: f64,
    members: Vec<SparseVec>,
}

impl OperatorSpan {
    pub fn new(level: usize, shape: (usize, usize), tol: f64) -> Self {
        Self {
            level,
            shape,
            tol,
            members: Vec::new(),
        }
    }

    pub fn from_dense(level: usize, tol: f64, ms: &[CMatrix]) -> Result<Self> {
        let shape = ms.first().map(|m| m.shape()).unwrap_or((0, 0));
        let mut s = Self::new(level, shape, tol);
        for m in ms {
            s.push_dense(m)?;
        }
        Ok(s)
    }

    fn check(&self, found: (usize, usize)) -> Result<()> {
        if found != self.shape {
            return Err(Error::InhomogeneousSpan {
                expected: self.shape,
                found,
            });
        }
        Ok(())
    }

    pub fn push_dense(&mut self, m: &CMatrix) -> Result<()> {
        self.check(m.shape())?;
        self.members.push(SparseVec::from_dense(m));
        Ok(())
    }

    pub fn push_sparse(&mut self, m: &SparseMatrix, keep_row: impl Fn(usize) -> bool) -> Result<()> {
        self.check(m.shape())?;
        self.members.push(SparseVec::from_matrix(m, keep_row));
        Ok(())
    }

    pub fn push_vec(&mut self, v: SparseVec) {
        self.members.push(v);
    }

    pub fn members(&self) -> &[SparseVec] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.check(other.shape)?;
        let mut s = self.clone();
        s.members.extend(other.members.iter().cloned());
        Ok(s)
    }
}

pub fn span_rank(span: &OperatorSpan) -> Result<RankReport> {
    Ok(rank_of(&span.members, span.tol))
}

/// `dim span(big) / span(small)`; errors unless `small` lies in `big` up to
/// ten times the rank tolerance.
pub fn quotient_dim(big: &OperatorSpan, small: &OperatorSpan) -> Result<usize> {
    big.check(small.shape)?;
    let e = embed(&[&big.members, &small.members]);
    let (b, s) = (&e.groups[0], &e.groups[1]);
    let rb = dense_rank(b, big.tol, e.sketched).rank;
    let rs = dense_rank(s, big.tol, e.sketched).rank;
    let mut u = DMatrix::zeros(b.nrows() + s.nrows(), b.ncols());
    u.rows_mut(0, b.nrows()).copy_from(b);
    u.rows_mut(b.nrows(), s.nrows()).copy_from(s);
    let ru = dense_rank(&u, 10.0 * big.tol, e.sketched).rank;
    if ru > rb {
        return Err(Error::NotContained(ru - rb));
    }
    Ok(rb - rs)
}

/// Orthonormal coefficient vectors `c` with `sum_i c_i M_i = 0`.
pub fn nullspace_coeffs(span: &OperatorSpan) -> Result<Vec<Vec<C64>>> {
    Ok(left_null(&span.members, span.tol))
}
