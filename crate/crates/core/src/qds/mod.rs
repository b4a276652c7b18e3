//! The quantum double suspension: the splitting of `Σ²A` into a finitely
//! supported part `A ⊗ S` and a Laurent part `C[z, z^-1]`, the symbol map, and
//! the suspended (and iterated) triples.

mod tensor;
mod tower;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use tensor::{TensorOp, TensorTerm};
pub use tower::{
    iterate_suspension, suspend_triple, Budget, Evenness, Letter, RealizedModel, SuspendedTriple,
    SuspensionBudget, TowerLevel, Triple,
};

use crate::linalg::{SparseMatrix, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Finitely supported Laurent polynomial.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LaurentPoly {
    pub coeffs: BTreeMap<i64, C64>,
}

impl LaurentPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(e: i64, c: C64) -> Self {
        let mut p = Self::zero();
        p.add_term(e, c);
        p
    }

    pub fn add_term(&mut self, e: i64, c: C64) {
        let v = self.coeffs.entry(e).or_insert(ZERO);
        *v += c;
        if *v == ZERO {
            self.coeffs.remove(&e);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.keys().map(|e| e.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = self.clone();
        for (&e, &c) in &other.coeffs {
            p.add_term(e, c);
        }
        p
    }

    pub fn scale(&self, a: C64) -> Self {
        let mut p = Self::zero();
        for (&e, &c) in &self.coeffs {
            p.add_term(e, c * a);
        }
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut p = Self::zero();
        for (&e, &c) in &self.coeffs {
            for (&f, &d) in &other.coeffs {
                p.add_term(e + f, c * d);
            }
        }
        p
    }

    /// Symbol of `[N, σ'(f)]`: `[N, l^e] = -e l^e` and `[N, l*^e] = e l*^e`.
    pub fn prime(&self) -> Self {
        let mut p = Self::zero();
        for (&e, &c) in &self.coeffs {
            p.add_term(e, c * (-(e as f64)));
        }
        p
    }

    /// `σ'(f)` truncated to `l^2({0..k})`: `z^e ↦ l^e` for `e ≥ 0`, `l*^{-e}` otherwise,
    /// with `l e_n = e_{n-1}`.
    pub fn sigma_prime(&self, k: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for (&e, &c) in &self.coeffs {
            let s = e.unsigned_abs() as usize;
            for i in 0..k.saturating_sub(s) {
                if e >= 0 {
                    t.push((i, i + s, c));
                } else {
                    t.push((i + s, i, c));
                }
            }
        }
        SparseMatrix::from_triplets(k, k, t)
    }
}

/// Finitely supported matrix on `l^2(N)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FinMatrix {
    pub entries: BTreeMap<(usize, usize), C64>,
}

impl FinMatrix {
    pub fn unit(i: usize, j: usize) -> Self {
        let mut m = Self::default();
        m.entries.insert((i, j), C64::new(1.0, 0.0));
        m
    }

    pub fn add_entry(&mut self, i: usize, j: usize, c: C64) {
        let v = self.entries.entry((i, j)).or_insert(ZERO);
        *v += c;
        if *v == ZERO {
            self.entries.remove(&(i, j));
        }
    }

    pub fn bound(&self) -> usize {
        self.entries.keys().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn at(&self, k: usize) -> SparseMatrix {
        assert!(k >= self.bound(), "finite matrix does not fit the truncation");
        SparseMatrix::from_triplets(k, k, self.entries.iter().map(|(&(i, j), &c)| (i, j, c)))
    }

    pub fn from_sparse(m: &SparseMatrix) -> Self {
        let mut f = Self::default();
        for (i, j, c) in m.iter() {
            f.add_entry(i, j, c);
        }
        f
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut f = Self::default();
        for (&(i, j), &a) in &self.entries {
            for (&(jj, k), &b) in &other.entries {
                if j == jj {
                    f.add_entry(i, k, a * b);
                }
            }
        }
        f
    }

    /// `[N, T]`, using `[N, e_ij] = (i - j) e_ij`.
    pub fn n_commutator(&self) -> Self {
        let mut f = Self::default();
        for (&(i, j), &c) in &self.entries {
            f.add_entry(i, j, c * (i as f64 - j as f64));
        }
        f
    }

    pub fn scale(&self, a: C64) -> Self {
        let mut f = Self::default();
        for (&(i, j), &c) in &self.entries {
            f.add_entry(i, j, c * a);
        }
        f
    }
}

/// A linear combination of letters of one triple.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AlgebraElement {
    pub terms: Vec<(C64, Letter)>,
}

impl AlgebraElement {
    pub fn letter(l: Letter) -> Self {
        Self {
            terms: alloc::vec![(C64::new(1.0, 0.0), l)],
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut terms = Vec::new();
        for (a, x) in &self.terms {
            for (b, y) in &other.terms {
                terms.push((a * b, Letter::product(alloc::vec![x.clone(), y.clone()])));
            }
        }
        Self { terms }
    }
}

/// `Σ a_k ⊗ T_k + σ'(f)` in the splitting `Σ²A ≅ (A ⊗ S) ⊕ C[z, z^-1]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuspendedElement {
    pub finite_part: Vec<(AlgebraElement, FinMatrix)>,
    pub laurent_part: LaurentPoly,
}

impl SuspendedElement {
    pub fn laurent(f: LaurentPoly) -> Self {
        Self {
            finite_part: Vec::new(),
            laurent_part: f,
        }
    }

    pub fn elementary(a: AlgebraElement, t: FinMatrix) -> Self {
        Self {
            finite_part: alloc::vec![(a, t)],
            laurent_part: LaurentPoly::zero(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut finite_part = self.finite_part.clone();
        finite_part.extend(other.finite_part.iter().cloned());
        Self {
            finite_part,
            laurent_part: self.laurent_part.add(&other.laurent_part),
        }
    }

    /// Product, re-split: the Laurent parts multiply; all cross terms and the
    /// finite correction `σ'(f)σ'(g) - σ'(fg)` go to the finite part.
    pub fn mul(&self, other: &Self) -> Self {
        let (f, g) = (&self.laurent_part, &other.laurent_part);
        let reach = f.degree() + g.degree() + 1;
        let k = 2 * reach + 2 + self.finite_bound().max(other.finite_bound());
        let mut finite_part = Vec::new();
        for (a, t) in &self.finite_part {
            for (b, s) in &other.finite_part {
                let ts = t.mul(s);
                if !ts.is_zero() {
                    finite_part.push((a.mul(b), ts));
                }
            }
            if !g.is_zero() {
                let tg = FinMatrix::from_sparse(&t.at(k).mul(&g.sigma_prime(k)));
                finite_part.push((a.clone(), tg));
            }
        }
        if !f.is_zero() {
            for (b, s) in &other.finite_part {
                let fs = FinMatrix::from_sparse(&f.sigma_prime(k).mul(&s.at(k)));
                finite_part.push((b.clone(), fs));
            }
        }
        let fg = f.mul(g);
        let corr = f.sigma_prime(k).mul(&g.sigma_prime(k)).sub(&fg.sigma_prime(k));
        let corr = corr.restrict_rows(|i| i < reach);
        let mut c = FinMatrix::default();
        for (i, j, v) in corr.iter() {
            if j < reach {
                c.add_entry(i, j, v);
            }
        }
        if !c.is_zero() {
            finite_part.push((AlgebraElement::letter(Letter::Unit), c));
        }
        Self {
            finite_part,
            laurent_part: fg,
        }
    }

    fn finite_bound(&self) -> usize {
        self.finite_part.iter().map(|(_, t)| t.bound()).max().unwrap_or(0)
    }

    pub fn describe(&self) -> String {
        format!(
            "{} finite term(s), Laurent support {:?}",
            self.finite_part.len(),
            self.laurent_part.coeffs.keys().collect::<Vec<_>>()
        )
    }
}

/// The symbol map: the Laurent part of the splitting.
pub fn rho_symbol(x: &SuspendedElement) -> LaurentPoly {
    x.laurent_part.clone()
}

/// Suspended generator symbols: `a ⊗ e_ij` for every base symbol (including the
/// unit `1`) and `i, j < index_cap`, together with `Z = 1 ⊗ l` and `Z* = 1 ⊗ l*`.
pub fn suspend_algebra(base_symbols: &[&str], index_cap: usize) -> Vec<String> {
    let mut out = Vec::new();
    for s in base_symbols {
        for i in 0..index_cap {
            for j in 0..index_cap {
                out.push(format!("{s}⊗e{i}{j}"));
            }
        }
    }
    out.push(String::from("Z"));
    out.push(String::from("Z*"));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::re;

    #[test]
    fn shift_identities() {
        let k = 10;
        let l = LaurentPoly::monomial(1, re(1.0)).sigma_prime(k);
        let ls = LaurentPoly::monomial(-1, re(1.0)).sigma_prime(k);
        let llstar = l.mul(&ls);
        for i in 0..k - 1 {
            assert_eq!(llstar.get(i, i), re(1.0));
        }
        let lstar_l = ls.mul(&l);
        assert_eq!(lstar_l.get(0, 0), re(0.0));
        for i in 1..k {
            assert_eq!(lstar_l.get(i, i), re(1.0));
        }
        let n = SparseMatrix::diagonal_real(&(0..k).map(|i| i as f64).collect::<Vec<_>>());
        assert!(n.commutator(&l).approx_eq(&l.scale(re(-1.0)), 0.0));
        let f = LaurentPoly::monomial(2, re(1.0)).add(&LaurentPoly::monomial(-3, re(2.0)));
        assert!(n.commutator(&f.sigma_prime(k)).approx_eq(&f.prime().sigma_prime(k), 0.0));
    }

    #[test]
    fn rho_is_multiplicative_and_kills_finite_parts() {
        let f = LaurentPoly::monomial(1, re(1.0)).add(&LaurentPoly::monomial(-2, re(3.0)));
        let g = LaurentPoly::monomial(-1, re(2.0)).add(&LaurentPoly::monomial(3, re(-1.0)));
        let x = SuspendedElement::laurent(f.clone())
            .add(&SuspendedElement::elementary(AlgebraElement::letter(Letter::Gen(0)), FinMatrix::unit(0, 1)));
        let y = SuspendedElement::laurent(g.clone());
        assert_eq!(rho_symbol(&x.mul(&y)), f.mul(&g));
        let fin = SuspendedElement::elementary(AlgebraElement::letter(Letter::Unit), FinMatrix::unit(2, 2));
        assert!(rho_symbol(&fin).is_zero());
    }

    #[test]
    fn product_correction_is_the_rank_one_projection() {
        let zs = SuspendedElement::laurent(LaurentPoly::monomial(-1, re(1.0)));
        let z = SuspendedElement::laurent(LaurentPoly::monomial(1, re(1.0)));
        let p = zs.mul(&z);
        assert_eq!(p.laurent_part, LaurentPoly::monomial(0, re(1.0)));
        assert_eq!(p.finite_part.len(), 1);
        assert_eq!(p.finite_part[0].1, FinMatrix::unit(0, 0).scale(re(-1.0)));
        assert!(z.mul(&zs).finite_part.is_empty());
    }

    #[test]
    fn suspended_symbols() {
        let s = suspend_algebra(&["1", "z"], 2);
        assert_eq!(s.len(), 2 * 4 + 2);
        assert!(s.contains(&String::from("z⊗e10")));
    }
}
