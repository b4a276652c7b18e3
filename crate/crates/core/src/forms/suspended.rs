use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::dirac::{algebra_products, junk_over, quotient_ranks};
use super::{enumerate_words_over, DiracOptions, Evaluator, FormExpr, FormWord};
use crate::error::{Error, Result};
use crate::linalg::{combine_columns, left_null, rank_of, SparseMatrix, SparseVec, C64};
use crate::qds::{Budget, FinMatrix, Letter, SuspendedElement, TensorOp, TowerLevel, Triple};

/// An element of the suspended Dirac dga in the splitting
/// `Ω¹ ≅ Ω_D¹(A) ⊗ S ⊕ Σ²A` (degree 1), `Σ²A` (degree 0) and
/// `Ω_Dⁿ(A) ⊗ S` (degree `n ≥ 2`).
#[derive(Clone, Debug, PartialEq)]
pub struct DecomposedElement {
    pub degree: usize,
    /// Base forms of degree `degree` tensored with finite matrices.
    pub forms: Vec<(FormExpr, FinMatrix)>,
    /// The `Σ²A` component, present in degrees 0 and 1.
    pub algebra: SuspendedElement,
}

impl DecomposedElement {
    pub fn algebra(x: SuspendedElement) -> Self {
        Self {
            degree: 0,
            forms: Vec::new(),
            algebra: x,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.forms.iter().all(|(f, t)| f.is_zero() || t.is_zero())
            && self.algebra.laurent_part.is_zero()
            && self
                .algebra
                .finite_part
                .iter()
                .all(|(a, t)| a.terms.is_empty() || t.is_zero())
    }
}

/// The suspended differential on the decomposed model:
/// `a ⊗ T + f ↦ da ⊗ T ⊕ (a ⊗ [N, T] + f')` in degree 0, `d ⊗ 1` on the
/// form part and zero on the `Σ²A` part in higher degrees.
pub fn delta_apply(triple: &Triple, x: &DecomposedElement) -> Result<DecomposedElement> {
    if triple.suspension().is_none() {
        return Err(Error::Invalid(format!("`{}` is not a suspension", triple.name())));
    }
    if x.degree == 0 {
        if !x.forms.is_empty() {
            return Err(Error::Invalid(String::from(
                "degree-0 elements have no form component",
            )));
        }
        let mut forms = Vec::new();
        let mut finite = Vec::new();
        for (a, t) in &x.algebra.finite_part {
            let mut da = FormExpr::zero(1);
            for (c, l) in &a.terms {
                da = da.add(&FormExpr::letter(l.clone()).d().scale(*c))?;
            }
            forms.push((da, t.clone()));
            let nt = t.n_commutator();
            if !nt.is_zero() {
                finite.push((a.clone(), nt));
            }
        }
        return Ok(DecomposedElement {
            degree: 1,
            forms,
            algebra: SuspendedElement {
                finite_part: finite,
                laurent_part: x.algebra.laurent_part.prime(),
            },
        });
    }
    Ok(DecomposedElement {
        degree: x.degree + 1,
        forms: x.forms.iter().map(|(w, t)| (w.d(), t.clone())).collect(),
        algebra: SuspendedElement::default(),
    })
}

fn split_level(lvl: &TowerLevel) -> (TowerLevel, usize) {
    let mut inner = lvl.clone();
    let k = inner.inner.pop().expect("suspended level");
    (inner, k)
}

/// Operator of a `Σ²A` element at a suspended level.
pub fn realize_suspended(triple: &Triple, x: &SuspendedElement, lvl: &TowerLevel) -> Result<TensorOp> {
    let s = triple
        .suspension()
        .ok_or_else(|| Error::Invalid(format!("`{}` is not a suspension", triple.name())))?;
    let (inner, k) = split_level(lvl);
    let mut acc = TensorOp::zero(triple.factor_dims(lvl));
    for (a, t) in &x.finite_part {
        if t.bound() > k {
            return Err(Error::BudgetExceedsTruncation(format!(
                "finite matrix of size {} exceeds inner cutoff {k}",
                t.bound()
            )));
        }
        let tm = t.at(k);
        for (c, l) in &a.terms {
            acc = acc.add(&s.base.realize(l, &inner)?.kron_right(&tm).scale(*c));
        }
    }
    if !x.laurent_part.is_zero() {
        let id = TensorOp::identity(s.base.factor_dims(&inner));
        acc = acc.add(&id.kron_right(&x.laurent_part.sigma_prime(k)));
    }
    Ok(acc)
}

/// Operator of a decomposed element; the `Σ²A` summand of degree 1 sits as
/// `F · x`.
pub fn realize_decomposed(triple: &Triple, x: &DecomposedElement, lvl: &TowerLevel) -> Result<TensorOp> {
    let s = triple
        .suspension()
        .ok_or_else(|| Error::Invalid(format!("`{}` is not a suspension", triple.name())))?;
    let (inner, k) = split_level(lvl);
    let mut acc = TensorOp::zero(triple.factor_dims(lvl));
    if !x.forms.is_empty() {
        let mut ev = Evaluator::new(&s.base, inner)?;
        for (w, t) in &x.forms {
            acc = acc.add(&ev.expr(w)?.kron_right(&t.at(k)));
        }
    }
    let alg = realize_suspended(triple, &x.algebra, lvl)?;
    match x.degree {
        0 => acc = acc.add(&alg),
        1 => acc = acc.add(&triple.sign(lvl).mul(&alg)),
        _ => {}
    }
    Ok(acc)
}

/// Left and right sides of one cohomology identity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CohomologyRow {
    pub degree: usize,
    /// Computed on the realized complex, per level.
    pub per_level: Vec<(usize, usize)>,
    pub realized: usize,
    /// Predicted from the base dga.
    pub predicted: usize,
    pub stabilized: bool,
}

/// Base quantities feeding the predicted dimensions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaseCohomology {
    pub dim_algebra: usize,
    pub rank_d0: usize,
    pub h0: usize,
    pub dim_omega1: usize,
    pub ker_d1: usize,
    pub h1: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CohomologyReport {
    pub triple: String,
    pub index_cap: usize,
    pub laurent_cap: usize,
    pub base: BaseCohomology,
    pub rows: Vec<CohomologyRow>,
}

struct BasePieces {
    stats: BaseCohomology,
    algebra_letters: Vec<Letter>,
    words1: Vec<FormWord>,
    /// Coefficients over `words1` spanning `ker d¹`.
    kernel: DMatrix<C64>,
}

fn base_pieces(base: &Triple, budget: &Budget, lvl: &TowerLevel, tol: f64, limit: u128) -> Result<(BasePieces, Vec<usize>)> {
    let bl = base.letters(budget)?;
    let a2 = algebra_products(base, &bl, lvl)?;
    let margins: Vec<usize> = base
        .margins_for(&bl, 2)
        .iter()
        .zip(base.margins_for(&a2, 2))
        .map(|(a, b)| *a.max(&b))
        .collect();
    base.check_window(lvl, &margins, budget)?;
    let mask = base.row_mask(lvl, &margins);
    let mut ev = Evaluator::new(base, lvl.clone())?;
    let mut alg = vec![Letter::Unit];
    alg.extend(a2.iter().cloned());
    let a_vecs: Vec<SparseVec> = alg
        .iter()
        .map(|l| Ok(SparseVec::from_matrix(&ev.letter(l)?.to_sparse(), |r| mask[r])))
        .collect::<Result<_>>()?;
    let d0: Vec<SparseVec> = alg
        .iter()
        .map(|l| Ok(SparseVec::from_matrix(&ev.d_letter(l)?.to_sparse(), |r| mask[r])))
        .collect::<Result<_>>()?;
    let dim_algebra = rank_of(&a_vecs, tol).rank;
    let rank_d0 = rank_of(&d0, tol).rank;
    let words1 = enumerate_words_over(&bl, 1, limit)?;
    let v1 = ev.vectors(&words1, &mask)?;
    let q = quotient_ranks(&v1, &d0, tol);
    if q.union > q.v {
        return Err(Error::NotContained(q.union - q.v));
    }
    let dim_omega1 = q.v;
    let junk = junk_over(
        base,
        2,
        &a2,
        core::slice::from_ref(lvl),
        core::slice::from_ref(&mask),
        tol,
        limit,
    )?;
    let dwords: Vec<FormWord> = words1.iter().map(FormWord::d).collect();
    let dv = ev.vectors(&dwords, &mask)?;
    let qd = quotient_ranks(&dv, &junk.members[0], tol);
    let rank_d1 = qd.union - qd.j;
    let ker_d1 = dim_omega1 - rank_d1;
    let mut stacked = dv.clone();
    stacked.extend(junk.members[0].iter().cloned());
    let null = left_null(&stacked, tol);
    let kernel = DMatrix::from_fn(words1.len(), null.len(), |i, j| null[j][i]);
    Ok((
        BasePieces {
            stats: BaseCohomology {
                dim_algebra,
                rank_d0,
                h0: dim_algebra - rank_d0,
                dim_omega1,
                ker_d1,
                h1: ker_d1 - rank_d0,
            },
            algebra_letters: alg,
            words1,
            kernel,
        },
        margins,
    ))
}

/// `dim A`, `rank d⁰`, `H⁰`, `dim Ω¹`, `dim ker d¹` and `H¹` of a base triple
/// at budget, required to agree across `opts.levels`.
pub fn base_cohomology(base: &Triple, budget: &Budget, opts: &DiracOptions) -> Result<BaseCohomology> {
    let mut levels = opts.levels.clone();
    levels.sort_unstable();
    levels.dedup();
    let mut out: Option<BaseCohomology> = None;
    for &l in &levels {
        let (bp, _) = base_pieces(base, budget, &base.level(l), opts.tol, opts.word_limit)?;
        match &out {
            Some(prev) if *prev != bp.stats => {
                return Err(Error::Numerical(format!(
                    "base cohomology data differ between levels: {prev:?} vs {:?}",
                    bp.stats
                )))
            }
            _ => out = Some(bp.stats),
        }
    }
    out.ok_or_else(|| Error::Invalid(String::from("no levels given")))
}

/// Cohomology of the realized suspended complex in degrees 0 and 1 next to
/// the dimensions predicted from the base dga:
/// `h⁰ = h⁰(A)·c + 1` and `h¹ = h¹(A)·c + dim A·c + dim ker d¹·(c² − c) + 1`
/// for `c` matrix units per side.
pub fn cohomology_dims(triple: &Triple, budget: &Budget, opts: &DiracOptions) -> Result<CohomologyReport> {
    let s = triple
        .suspension()
        .ok_or_else(|| Error::Invalid(format!("`{}` is not a suspension", triple.name())))?;
    let sb = budget
        .outer()
        .ok_or_else(|| Error::BudgetMismatch(String::from("budget has no suspension level")))?;
    let (c, lc) = (sb.index_cap, sb.laurent_cap);
    let mut levels = opts.levels.clone();
    levels.sort_unstable();
    levels.dedup();
    let mut base_stats: Option<BaseCohomology> = None;
    let mut h0s = Vec::new();
    let mut h1s = Vec::new();
    for &l in &levels {
        let lvl = triple.level(l);
        let (inner, _) = split_level(&lvl);
        let (bp, bm) = base_pieces(&s.base, &budget.inner(), &inner, opts.tol, opts.word_limit)?;
        if let Some(prev) = &base_stats {
            if *prev != bp.stats {
                return Err(Error::Numerical(format!(
                    "base cohomology data differ between levels: {prev:?} vs {:?}",
                    bp.stats
                )));
            }
        }
        let mut margins = bm.clone();
        margins.push(lc);
        triple.check_window(&lvl, &margins, budget)?;
        let mask = triple.row_mask(&lvl, &margins);
        let vec_of = |op: &TensorOp| SparseVec::from_matrix(&op.to_sparse(), |r| mask[r]);
        let mut ev = Evaluator::new(triple, lvl.clone())?;
        let mut c0 = Vec::new();
        for a in &bp.algebra_letters {
            for i in 0..c {
                for j in 0..c {
                    c0.push(Letter::fin(a.clone(), i, j));
                }
            }
        }
        c0.push(Letter::Unit);
        for e in 1..=lc as i32 {
            c0.push(Letter::Laurent(-e));
            c0.push(Letter::Laurent(e));
        }
        let f = triple.sign(&lvl);
        let mut x0 = Vec::with_capacity(c0.len());
        let mut dx0 = Vec::with_capacity(c0.len());
        let mut fx0 = Vec::with_capacity(c0.len());
        for l in &c0 {
            let a = ev.letter(l)?;
            x0.push(vec_of(&a));
            dx0.push(vec_of(&ev.d_letter(l)?));
            fx0.push(vec_of(&f.mul(&a)));
        }
        let mut bev = Evaluator::new(&s.base, inner.clone())?;
        let k = *lvl.inner.last().unwrap();
        let mut kern = Vec::new();
        for i in 0..c {
            for j in 0..c {
                let e = SparseMatrix::from_triplets(k, k, [(i, j, C64::new(1.0, 0.0))]);
                let ws: Vec<SparseVec> = bp
                    .words1
                    .iter()
                    .map(|w| Ok(vec_of(&bev.word(w)?.kron_right(&e))))
                    .collect::<Result<_>>()?;
                kern.extend(combine_columns(&ws, &bp.kernel));
            }
        }
        let mut k1 = kern;
        k1.extend(fx0);
        let q = quotient_ranks(&k1, &dx0, opts.tol);
        if q.union > q.v {
            return Err(Error::NotContained(q.union - q.v));
        }
        let r0 = rank_of(&x0, opts.tol).rank;
        h0s.push((l, r0 - q.j));
        h1s.push((l, q.v - q.j));
        base_stats = Some(bp.stats);
    }
    let b = base_stats.ok_or_else(|| Error::Invalid(String::from("at least one level is required")))?;
    let row = |degree: usize, per: Vec<(usize, usize)>, predicted: usize| {
        let realized = per.last().map(|x| x.1).unwrap_or(0);
        CohomologyRow {
            degree,
            stabilized: per.len() >= 3 && per.iter().all(|x| x.1 == realized),
            per_level: per,
            realized,
            predicted,
        }
    };
    let rows = vec![
        row(0, h0s, b.h0 * c + 1),
        row(1, h1s, b.h1 * c + b.dim_algebra * c + b.ker_d1 * (c * c - c) + 1),
    ];
    Ok(CohomologyReport {
        triple: triple.name(),
        index_cap: c,
        laurent_cap: lc,
        base: b,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, re};
    use crate::qds::{suspend_triple, AlgebraElement, LaurentPoly};
    use crate::triple::make_circle_triple;

    fn sigma2() -> Triple {
        let c: Triple = make_circle_triple(16, 2).unwrap().into();
        suspend_triple(c, 10, 3).unwrap().into()
    }

    fn sample() -> DecomposedElement {
        let a = AlgebraElement {
            terms: vec![(re(2.0), Letter::Gen(1)), (c64(0.0, 1.0), Letter::Gen(2))],
        };
        let mut t = FinMatrix::unit(0, 2);
        t.add_entry(1, 1, re(-1.5));
        let mut f = LaurentPoly::monomial(1, re(1.0));
        f.add_term(-2, c64(0.5, 0.5));
        DecomposedElement::algebra(SuspendedElement::elementary(a, t).add(&SuspendedElement::laurent(f)))
    }

    #[test]
    fn delta_matches_commutator_with_suspended_dirac() {
        let t = sigma2();
        let lvl = t.level(16);
        let x = sample();
        let dx = delta_apply(&t, &x).unwrap();
        let lhs = realize_decomposed(&t, &dx, &lvl).unwrap().to_sparse();
        let op = realize_decomposed(&t, &x, &lvl).unwrap();
        let rhs = t.dirac(&lvl).commutator(&op).to_sparse();
        let mask = t.row_mask(&lvl, &[3, 2]);
        assert!(lhs.restrict_rows(|r| mask[r]).approx_eq(&rhs.restrict_rows(|r| mask[r]), 1e-10));
    }

    #[test]
    fn delta_squares_to_zero() {
        let t = sigma2();
        let x = sample();
        let ddx = delta_apply(&t, &delta_apply(&t, &x).unwrap()).unwrap();
        assert_eq!(ddx.degree, 2);
        assert!(ddx.is_zero());
    }

    #[test]
    fn cohomology_matches_prediction_small() {
        let t = sigma2();
        let r = cohomology_dims(&t, &Budget::suspended(1, 2, 2), &DiracOptions::new(vec![12, 16])).unwrap();
        assert_eq!(r.base.dim_algebra, 5);
        assert_eq!(r.base.h0, 1);
        assert_eq!(r.base.h1, 1);
        for row in &r.rows {
            assert_eq!(row.realized, row.predicted, "{row:?}");
        }
    }
}
