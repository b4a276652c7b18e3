//! Universal differential forms over the letters of a triple, their
//! representation `π(a₀ da₁ … daₖ) = a₀[D, a₁] … [D, aₖ]`, junk, and the
//! derived dimension reports.

mod dirac;
mod suspended;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub use dirac::{
    algebra_products, check_dirac_windows, dirac_dga_dims, graded_dims, junk_space, DegreeReport, DiracDgaReport, DiracOptions,
    GradedRow, JunkSpace, LevelDims,
};
pub use suspended::{
    base_cohomology, cohomology_dims, delta_apply, realize_decomposed, realize_suspended, BaseCohomology, CohomologyReport, CohomologyRow,
    DecomposedElement,
};

use crate::error::{Error, Result};
use crate::linalg::{combine_columns, dedup_proportional, independent_subset, left_null, SparseVec, C64};
use crate::qds::{Budget, Letter, TensorOp, TowerLevel, Triple};

/// `coeff · a₀ da₁ … daₖ`.
#[derive(Clone, Debug, PartialEq)]
pub struct FormWord {
    pub coeff: C64,
    /// `letters[0]` is `a₀`; the rest are differentiated.
    pub letters: Vec<Letter>,
}

impl FormWord {
    pub fn new(a0: Letter, ds: Vec<Letter>) -> Self {
        let mut letters = vec![a0];
        letters.extend(ds);
        Self {
            coeff: C64::new(1.0, 0.0),
            letters,
        }
    }

    pub fn degree(&self) -> usize {
        self.letters.len() - 1
    }

    /// Vanishes identically: zero coefficient or `d1` among the letters.
    pub fn is_trivial(&self) -> bool {
        self.coeff == C64::new(0.0, 0.0) || self.letters[1..].iter().any(Letter::is_unit)
    }

    /// `d(a₀ da₁ … daₖ) = da₀ da₁ … daₖ`.
    pub fn d(&self) -> FormWord {
        let mut letters = vec![Letter::Unit];
        letters.extend(self.letters.iter().cloned());
        FormWord {
            coeff: self.coeff,
            letters,
        }
    }
}

/// A homogeneous universal form.
#[derive(Clone, Debug, PartialEq)]
pub struct FormExpr {
    pub degree: usize,
    pub terms: Vec<FormWord>,
}

impl FormExpr {
    pub fn zero(degree: usize) -> Self {
        Self { degree, terms: Vec::new() }
    }

    pub fn word(w: FormWord) -> Self {
        Self {
            degree: w.degree(),
            terms: vec![w],
        }
        .normalize()
    }

    pub fn letter(a: Letter) -> Self {
        Self::word(FormWord::new(a, Vec::new()))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Merges equal words and drops trivial ones.
    pub fn normalize(self) -> Self {
        let mut acc: BTreeMap<Vec<Letter>, C64> = BTreeMap::new();
        let mut order = Vec::new();
        for w in self.terms {
            if w.is_trivial() {
                continue;
            }
            if !acc.contains_key(&w.letters) {
                order.push(w.letters.clone());
            }
            *acc.entry(w.letters).or_insert(C64::new(0.0, 0.0)) += w.coeff;
        }
        let terms = order
            .into_iter()
            .filter_map(|l| {
                let c = acc[&l];
                (c.norm() > 1e-14).then_some(FormWord { coeff: c, letters: l })
            })
            .collect();
        Self {
            degree: self.degree,
            terms,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if !self.is_zero() && !other.is_zero() && self.degree != other.degree {
            return Err(Error::Invalid(format!(
                "cannot add forms of degree {} and {}",
                self.degree, other.degree
            )));
        }
        let mut t = self.terms.clone();
        t.extend(other.terms.iter().cloned());
        Ok(Self {
            degree: if self.is_zero() { other.degree } else { self.degree },
            terms: t,
        }
        .normalize())
    }

    pub fn scale(&self, a: C64) -> Self {
        Self {
            degree: self.degree,
            terms: self
                .terms
                .iter()
                .map(|w| FormWord {
                    coeff: w.coeff * a,
                    letters: w.letters.clone(),
                })
                .collect(),
        }
        .normalize()
    }

    pub fn d(&self) -> Self {
        Self {
            degree: self.degree + 1,
            terms: self.terms.iter().map(FormWord::d).collect(),
        }
        .normalize()
    }

    /// Product in normal form, moving algebra letters left with
    /// `(da)b = d(ab) − a db`.
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        for u in &self.terms {
            for v in &other.terms {
                let head = right_mul(&u.letters, &v.letters[0]);
                for mut w in head {
                    w.coeff *= u.coeff * v.coeff;
                    w.letters.extend(v.letters[1..].iter().cloned());
                    out.push(w);
                }
            }
        }
        Self {
            degree: self.degree + other.degree,
            terms: out,
        }
        .normalize()
    }

    /// `(a₀ da₁ … daₖ)^* = (−1)^k da_k^* … da₁^* a₀^*`, in normal form.
    pub fn adjoint(&self, triple: &Triple) -> Result<Self> {
        let mut out = Vec::new();
        for w in &self.terms {
            let mut ds = vec![Letter::Unit];
            for l in w.letters[1..].iter().rev() {
                ds.push(triple.adjoint(l)?);
            }
            let sign = if w.degree() % 2 == 0 { 1.0 } else { -1.0 };
            for mut t in right_mul(&ds, &triple.adjoint(&w.letters[0])?) {
                t.coeff *= w.coeff.conj() * sign;
                out.push(t);
            }
        }
        Ok(Self {
            degree: self.degree,
            terms: out,
        }
        .normalize())
    }
}

/// `(a₀ da₁ … daₖ) · b` as a sum of normal-form words.
fn right_mul(word: &[Letter], b: &Letter) -> Vec<FormWord> {
    let k = word.len() - 1;
    if k == 0 {
        return vec![FormWord {
            coeff: C64::new(1.0, 0.0),
            letters: vec![Letter::product(vec![word[0].clone(), b.clone()])],
        }];
    }
    let prefix = &word[..k];
    let mut first = prefix.to_vec();
    first.push(Letter::product(vec![word[k].clone(), b.clone()]));
    let mut out = vec![FormWord {
        coeff: C64::new(1.0, 0.0),
        letters: first,
    }];
    for mut w in right_mul(prefix, &word[k]) {
        w.coeff = -w.coeff;
        w.letters.push(b.clone());
        out.push(w);
    }
    out
}

/// All words `a₀ da₁ … daₖ` with `a₀ ∈ {1} ∪ letters` and `aᵢ ∈ letters`.
pub fn enumerate_words_over(letters: &[Letter], degree: usize, limit: u128) -> Result<Vec<FormWord>> {
    let n = letters.len() as u128;
    let count = (n + 1).saturating_mul(n.saturating_pow(degree as u32));
    if count > limit {
        return Err(Error::WordBlowup { count, limit });
    }
    let mut heads = vec![Letter::Unit];
    heads.extend(letters.iter().cloned());
    let mut out = Vec::with_capacity(count as usize);
    for a0 in &heads {
        if degree > 0 && letters.is_empty() {
            break;
        }
        let mut idx = vec![0usize; degree];
        'odometer: loop {
            out.push(FormWord::new(a0.clone(), idx.iter().map(|&i| letters[i].clone()).collect()));
            let mut p = degree;
            loop {
                if p == 0 {
                    break 'odometer;
                }
                p -= 1;
                idx[p] += 1;
                if idx[p] < letters.len() {
                    break;
                }
                idx[p] = 0;
            }
        }
    }
    Ok(out)
}

pub const DEFAULT_WORD_LIMIT: u128 = 200_000;

/// Words of degree `degree` over the letters of `budget`.
pub fn enumerate_words(triple: &Triple, degree: usize, budget: &Budget) -> Result<Vec<FormWord>> {
    enumerate_words_over(&triple.letters(budget)?, degree, DEFAULT_WORD_LIMIT)
}

/// Caches realized letters and their commutators with `D` at one level.
pub struct Evaluator<'a> {
    triple: &'a Triple,
    level: TowerLevel,
    dirac: TensorOp,
    cache: BTreeMap<Letter, (TensorOp, TensorOp)>,
}

impl<'a> Evaluator<'a> {
    pub fn new(triple: &'a Triple, level: TowerLevel) -> Result<Self> {
        triple.check_level(&level)?;
        let dirac = triple.dirac(&level);
        Ok(Self {
            triple,
            level,
            dirac,
            cache: BTreeMap::new(),
        })
    }

    pub fn level(&self) -> &TowerLevel {
        &self.level
    }

    pub fn triple(&self) -> &Triple {
        self.triple
    }

    fn entry(&mut self, l: &Letter) -> Result<&(TensorOp, TensorOp)> {
        if !self.cache.contains_key(l) {
            let a = self.triple.realize(l, &self.level)?;
            let da = self.dirac.commutator(&a);
            self.cache.insert(l.clone(), (a, da));
        }
        Ok(&self.cache[l])
    }

    pub fn letter(&mut self, l: &Letter) -> Result<TensorOp> {
        Ok(self.entry(l)?.0.clone())
    }

    pub fn d_letter(&mut self, l: &Letter) -> Result<TensorOp> {
        Ok(self.entry(l)?.1.clone())
    }

    pub fn word(&mut self, w: &FormWord) -> Result<TensorOp> {
        let mut acc = self.entry(&w.letters[0])?.0.clone();
        for l in &w.letters[1..] {
            if acc.is_zero() {
                break;
            }
            let d = &self.entry(l)?.1;
            acc = acc.mul(d);
        }
        Ok(acc.scale(w.coeff))
    }

    pub fn expr(&mut self, e: &FormExpr) -> Result<TensorOp> {
        let mut acc = TensorOp::zero(self.triple.factor_dims(&self.level));
        for w in &e.terms {
            acc = acc.add(&self.word(w)?);
        }
        Ok(acc)
    }

    /// Vectorized images of `words` restricted to the rows in `mask`.
    pub fn vectors(&mut self, words: &[FormWord], mask: &[bool]) -> Result<Vec<SparseVec>> {
        words
            .iter()
            .map(|w| Ok(SparseVec::from_matrix(&self.word(w)?.to_sparse(), |r| mask[r])))
            .collect()
    }

    /// Like [`Evaluator::vectors`], keeping one representative per line.
    pub fn spanning_vectors(&mut self, words: &[FormWord], mask: &[bool]) -> Result<Vec<SparseVec>> {
        let v = self.vectors(words, mask)?;
        Ok(dedup_proportional(&v).into_iter().map(|i| v[i].clone()).collect())
    }
}

/// `π(w)` at one level as a sparse operator.
pub fn pi_eval(triple: &Triple, word: &FormWord, level: &TowerLevel) -> Result<crate::linalg::SparseMatrix> {
    Ok(Evaluator::new(triple, level.clone())?.word(word)?.to_sparse())
}

/// `π(w)` as a tensor-factorized operator.
pub fn pi_eval_tensor(triple: &Triple, word: &FormWord, level: &TowerLevel) -> Result<TensorOp> {
    Evaluator::new(triple, level.clone())?.word(word)
}

/// The budget subspace of a suspension in degree `k`: operators whose
/// outermost inner-factor row and column indices are below the matrix-unit
/// cap, plus `span{F^k ⊗ σ'(z^e) : |e| ≤ laurent cap}`.
pub(crate) struct BudgetSpace {
    n: u64,
    outer: u64,
    cap: u64,
    pub extras: Vec<SparseVec>,
}

impl BudgetSpace {
    pub fn new(triple: &Triple, budget: &Budget, level: &TowerLevel, degree: usize, mask: &[bool]) -> Result<Option<Self>> {
        let Some(sb) = budget.outer() else {
            return Ok(None);
        };
        let outer = *level.inner.last().expect("suspended level") as u64;
        let dims = triple.factor_dims(level);
        let f = triple.sign(level);
        let mut fk = TensorOp::identity(dims.clone());
        for _ in 0..degree {
            fk = fk.mul(&f);
        }
        let mut extras = Vec::new();
        for e in -(sb.laurent_cap as i64)..=sb.laurent_cap as i64 {
            let l = if e == 0 { Letter::Unit } else { Letter::Laurent(e as i32) };
            let op = fk.mul(&triple.realize(&l, level)?);
            extras.push(SparseVec::from_matrix(&op.to_sparse(), |r| mask[r]));
        }
        Ok(Some(Self {
            n: triple.dim(level) as u64,
            outer,
            cap: sb.index_cap as u64,
            extras,
        }))
    }

    pub fn in_coordinates(&self, coord: u64) -> bool {
        let (r, c) = (coord / self.n, coord % self.n);
        r % self.outer < self.cap && c % self.outer < self.cap
    }

    /// A spanning set of `span(members) ∩ W`.
    pub fn intersect(&self, members: &[SparseVec], tol: f64) -> Vec<SparseVec> {
        let mut out = Vec::new();
        let mut mixed = Vec::new();
        for v in members {
            let (_, rest) = v.split(|c| self.in_coordinates(c));
            if rest.is_zero() {
                out.push(v.clone());
            } else {
                mixed.push(v.clone());
            }
        }
        if mixed.is_empty() {
            return out;
        }
        let mixed: Vec<SparseVec> = independent_subset(&mixed, tol).into_iter().map(|i| mixed[i].clone()).collect();
        let nm = mixed.len();
        let mut q: Vec<SparseVec> = mixed.iter().map(|v| v.split(|c| self.in_coordinates(c)).1).collect();
        for x in &self.extras {
            q.push(x.split(|c| self.in_coordinates(c)).1);
        }
        let null = left_null(&q, tol);
        if null.is_empty() {
            return out;
        }
        let coeffs = nalgebra::DMatrix::from_fn(nm, null.len(), |i, j| null[j][i]);
        for (j, v) in combine_columns(&mixed, &coeffs).into_iter().enumerate() {
            let scale: f64 = (0..nm).map(|i| coeffs[(i, j)].norm() * mixed[i].norm()).sum();
            if v.norm() > 1e-8 * scale {
                out.push(v);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::re;
    use crate::triple::make_circle_triple;

    fn circle() -> Triple {
        make_circle_triple(24, 3).unwrap().into()
    }

    #[test]
    fn enumeration_counts_and_order() {
        let t = circle();
        let w = enumerate_words(&t, 2, &Budget::leaf(1)).unwrap();
        assert_eq!(w.len(), 3 * 2 * 2);
        assert!(w[0].letters[0].is_unit());
        let err = enumerate_words_over(&t.letters(&Budget::leaf(3)).unwrap(), 9, 1000).unwrap_err();
        assert!(matches!(err, Error::WordBlowup { .. }));
        assert_eq!(enumerate_words_over(&[], 0, 10).unwrap().len(), 1);
        assert!(enumerate_words_over(&[], 2, 10).unwrap().is_empty());
    }

    #[test]
    fn d_squares_to_zero_and_leibniz_holds_under_pi() {
        let t = circle();
        let lv = TowerLevel::leaf(24);
        let ls = t.letters(&Budget::leaf(2)).unwrap();
        let a = FormExpr::word(FormWord::new(ls[0].clone(), vec![ls[3].clone()]));
        let b = FormExpr::word(FormWord::new(ls[2].clone(), vec![ls[1].clone()]));
        assert!(a.d().d().is_zero());
        let mut ev = Evaluator::new(&t, lv).unwrap();
        let lhs = ev.expr(&a.mul(&b)).unwrap().to_sparse();
        let rhs = ev.expr(&a).unwrap().mul(&ev.expr(&b).unwrap()).to_sparse();
        assert!(lhs.approx_eq(&rhs, 1e-10));
        let dab = a.mul(&b).d();
        let leib = a.d().mul(&b).add(&a.mul(&b.d()).scale(re(-1.0))).unwrap();
        let x = ev.expr(&dab).unwrap().to_sparse();
        let y = ev.expr(&leib).unwrap().to_sparse();
        let mask = t.row_mask(ev.level(), &[12]);
        assert!(x.restrict_rows(|r| mask[r]).approx_eq(&y.restrict_rows(|r| mask[r]), 1e-9));
    }

    #[test]
    fn adjoint_matches_operator_adjoint() {
        let t = circle();
        let ls = t.letters(&Budget::leaf(2)).unwrap();
        let a = FormExpr::word(FormWord::new(ls[1].clone(), vec![ls[3].clone(), ls[0].clone()]));
        let mut ev = Evaluator::new(&t, TowerLevel::leaf(24)).unwrap();
        let x = ev.expr(&a).unwrap().to_sparse().adjoint();
        let y = ev.expr(&a.adjoint(&t).unwrap()).unwrap().to_sparse();
        assert!(x.approx_eq(&y, 1e-9));
    }
}
