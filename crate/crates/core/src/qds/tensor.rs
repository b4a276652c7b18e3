use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{SparseMatrix, C64};

/// `coeff · (factors[0] ⊗ factors[1] ⊗ …)`, factor 0 outermost.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorTerm {
    pub coeff: C64,
    pub factors: Vec<SparseMatrix>,
}

/// A finite sum of elementary tensors on `⊗_f C^{dims[f]}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorOp {
    pub dims: Vec<usize>,
    pub terms: Vec<TensorTerm>,
}

impl TensorOp {
    pub fn zero(dims: Vec<usize>) -> Self {
        Self { dims, terms: Vec::new() }
    }

    pub fn identity(dims: Vec<usize>) -> Self {
        let factors = dims.iter().map(|&n| SparseMatrix::identity(n)).collect();
        Self {
            dims,
            terms: vec![TensorTerm {
                coeff: C64::new(1.0, 0.0),
                factors,
            }],
        }
    }

    pub fn elementary(coeff: C64, factors: Vec<SparseMatrix>) -> Self {
        let dims = factors.iter().map(|f| f.nrows()).collect();
        let mut t = Self { dims, terms: Vec::new() };
        if coeff != C64::new(0.0, 0.0) && factors.iter().all(|f| !f.is_zero()) {
            t.terms.push(TensorTerm { coeff, factors });
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, a: C64) -> Self {
        if a == C64::new(0.0, 0.0) {
            return Self::zero(self.dims.clone());
        }
        let mut out = self.clone();
        for t in out.terms.iter_mut() {
            t.coeff *= a;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dims, other.dims, "tensor shapes differ");
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        out.simplify()
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dims, other.dims, "tensor shapes differ");
        let mut out = Self::zero(self.dims.clone());
        for a in &self.terms {
            for b in &other.terms {
                let factors: Vec<SparseMatrix> =
                    a.factors.iter().zip(&b.factors).map(|(x, y)| x.mul(y)).collect();
                if factors.iter().all(|f| !f.is_zero()) {
                    out.terms.push(TensorTerm {
                        coeff: a.coeff * b.coeff,
                        factors,
                    });
                }
            }
        }
        out.simplify()
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.mul(other).sub(&other.mul(self))
    }

    pub fn adjoint(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| TensorTerm {
                    coeff: t.coeff.conj(),
                    factors: t.factors.iter().map(|f| f.adjoint()).collect(),
                })
                .collect(),
        }
    }

    /// Appends an outer-right factor to every term.
    pub fn kron_right(&self, m: &SparseMatrix) -> Self {
        let mut dims = self.dims.clone();
        dims.push(m.nrows());
        let mut out = Self::zero(dims);
        if m.is_zero() {
            return out;
        }
        for t in &self.terms {
            let mut factors = t.factors.clone();
            factors.push(m.clone());
            out.terms.push(TensorTerm { coeff: t.coeff, factors });
        }
        out
    }

    /// Merges terms that agree, up to scaling, in every factor but one, for
    /// each factor position in turn. Unbounded parts of commutators cancel
    /// here rather than inside traces.
    pub fn simplify(mut self) -> Self {
        let nf = self.dims.len();
        if nf == 0 {
            return self;
        }
        self.terms.retain(|t| t.coeff != C64::new(0.0, 0.0) && t.factors.iter().all(|f| !f.is_zero()));
        for pos in 0..nf {
            self.terms = merge_on(core::mem::take(&mut self.terms), pos);
        }
        self
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        let n = self.dim();
        let mut acc = SparseMatrix::zeros(n, n);
        for t in &self.terms {
            let mut m = t.factors[0].clone();
            for f in &t.factors[1..] {
                m = m.kron(f);
            }
            acc = acc.add_scaled(t.coeff, &m);
        }
        acc
    }

    /// `Tr(X · W_0 ⊗ W_1 ⊗ …)` for diagonal weights, using factorization.
    pub fn trace_weighted(&self, weights: &[Vec<f64>]) -> C64 {
        self.terms
            .iter()
            .map(|t| {
                t.factors
                    .iter()
                    .zip(weights)
                    .fold(t.coeff, |acc, (f, w)| acc * f.trace_weighted(w))
            })
            .sum()
    }

    /// `Tr(X^* Y W)` for diagonal product weights.
    pub fn inner_weighted(&self, other: &Self, weights: &[Vec<f64>]) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for a in &self.terms {
            for b in &other.terms {
                let mut v = a.coeff.conj() * b.coeff;
                for ((x, y), w) in a.factors.iter().zip(&b.factors).zip(weights) {
                    v *= x.inner_weighted(y, w);
                    if v == C64::new(0.0, 0.0) {
                        break;
                    }
                }
                s += v;
            }
        }
        s
    }
}

/// Sums factor `pos` over terms whose other factors coincide after scaling
/// each to leading entry one.
fn merge_on(mut terms: Vec<TensorTerm>, pos: usize) -> Vec<TensorTerm> {
    for t in terms.iter_mut() {
        let mut c = t.coeff;
        for (f, m) in t.factors.iter_mut().enumerate() {
            if f == pos {
                continue;
            }
            let lead = m.iter().next().map(|(_, _, v)| v);
            if let Some(v) = lead.filter(|&v| v != C64::new(1.0, 0.0)) {
                *m = m.div_scalar(v);
                c *= v;
            }
        }
        if c != C64::new(1.0, 0.0) {
            t.factors[pos] = t.factors[pos].scale(c);
        }
        t.coeff = C64::new(1.0, 0.0);
    }
    let key = |t: &TensorTerm| {
        crate::linalg::fnv(
            t.factors
                .iter()
                .enumerate()
                .filter(|(f, _)| *f != pos)
                .map(|(_, m)| m.content_hash()),
        )
    };
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, t) in terms.iter().enumerate() {
        groups.entry(key(t)).or_default().push(i);
    }
    let same = |a: &TensorTerm, b: &TensorTerm| {
        a.factors.iter().zip(&b.factors).enumerate().all(|(f, (x, y))| f == pos || x == y)
    };
    let mut order: Vec<&Vec<usize>> = groups.values().collect();
    order.sort_by_key(|g| g[0]);
    let mut used = vec![false; terms.len()];
    let mut merged = Vec::new();
    for idx in order {
        for (a, &i) in idx.iter().enumerate() {
            if used[i] {
                continue;
            }
            used[i] = true;
            let mut acc = terms[i].clone();
            for &j in &idx[a + 1..] {
                if !used[j] && same(&acc, &terms[j]) {
                    used[j] = true;
                    acc.factors[pos] = acc.factors[pos].add(&terms[j].factors[pos]);
                }
            }
            if !acc.factors[pos].is_zero() {
                merged.push(acc);
            }
        }
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, re};

    fn m(n: usize, t: &[(usize, usize, f64)]) -> SparseMatrix {
        SparseMatrix::from_triplets(n, n, t.iter().map(|&(i, j, v)| (i, j, re(v))))
    }

    #[test]
    fn products_and_simplification_match_kronecker() {
        let a = TensorOp::elementary(c64(1., 1.), vec![m(2, &[(0, 1, 1.)]), m(3, &[(1, 1, 2.), (2, 0, 1.)])]);
        let b = TensorOp::elementary(re(2.), vec![m(2, &[(1, 0, 1.), (0, 0, 3.)]), m(3, &[(1, 2, 1.)])]);
        let s = a.add(&b).mul(&b.add(&a));
        let dense = (a.to_sparse().add(&b.to_sparse())).mul(&b.to_sparse().add(&a.to_sparse()));
        assert!(s.to_sparse().approx_eq(&dense, 1e-13));
        let c = a.commutator(&b).to_sparse();
        assert!(c.approx_eq(&a.to_sparse().commutator(&b.to_sparse()), 1e-13));
        let merged = a.add(&a).add(&a.scale(re(-2.0)));
        assert!(merged.is_zero());
    }

    #[test]
    fn weighted_trace_factorizes() {
        let x = TensorOp::elementary(re(1.), vec![m(2, &[(0, 0, 1.), (1, 1, 2.)]), m(2, &[(0, 0, 3.), (1, 0, 1.)])]);
        let w = vec![vec![0.5, 0.25], vec![1.0, 0.1]];
        let full = x.to_sparse();
        let wf: Vec<f64> = (0..4).map(|i| w[0][i / 2] * w[1][i % 2]).collect();
        assert!((x.trace_weighted(&w) - full.trace_weighted(&wf)).norm() < 1e-14);
        let y = x.mul(&x);
        assert!((x.inner_weighted(&y, &w) - full.inner_weighted(&y.to_sparse(), &wf)).norm() < 1e-13);
    }
}
