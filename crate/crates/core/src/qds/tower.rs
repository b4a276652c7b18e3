use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::{LaurentPoly, TensorOp};
use crate::error::{Error, Result};
use crate::linalg::{re, SparseMatrix};
use crate::triple::{SignConvention, SpectralTripleModel};

/// Word budget at one suspension step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuspensionBudget {
    /// Matrix units `e_ij` with `i, j < index_cap`.
    pub index_cap: usize,
    /// Laurent letters `σ'(z^b)` with `1 ≤ |b| ≤ laurent_cap`.
    pub laurent_cap: usize,
}

/// Word budget: a per-letter degree cap for the base algebra and one
/// [`SuspensionBudget`] per suspension, innermost first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Budget {
    pub base_degree: u32,
    pub suspensions: Vec<SuspensionBudget>,
}

impl Budget {
    pub fn leaf(base_degree: u32) -> Self {
        Self {
            base_degree,
            suspensions: Vec::new(),
        }
    }

    pub fn suspended(base_degree: u32, index_cap: usize, laurent_cap: usize) -> Self {
        Self {
            base_degree,
            suspensions: vec![SuspensionBudget { index_cap, laurent_cap }],
        }
    }

    pub fn outer(&self) -> Option<SuspensionBudget> {
        self.suspensions.last().copied()
    }

    /// The budget of the base triple one suspension down.
    pub fn inner(&self) -> Budget {
        let mut b = self.clone();
        b.suspensions.pop();
        b
    }
}

/// Truncation levels of every tensor factor: the base level and one inner
/// cutoff per suspension, innermost first.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TowerLevel {
    pub base: usize,
    pub inner: Vec<usize>,
}

impl TowerLevel {
    pub fn leaf(base: usize) -> Self {
        Self { base, inner: Vec::new() }
    }

    fn pop(&self) -> (TowerLevel, usize) {
        let mut l = self.clone();
        let k = l.inner.pop().expect("tower level has no inner factor");
        (l, k)
    }
}

/// Symbolic algebra element used as a word letter.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    Unit,
    /// Leaf generator by index.
    Gen(u16),
    /// `a ⊗ e_ij` at the outermost suspension.
    Fin(alloc::boxed::Box<Letter>, u16, u16),
    /// `1 ⊗ σ'(z^b)` at the outermost suspension, `b ≠ 0`.
    Laurent(i32),
    Product(Vec<Letter>),
}

impl Letter {
    /// Flattened product; units dropped.
    pub fn product(parts: Vec<Letter>) -> Letter {
        let mut flat = Vec::new();
        for p in parts {
            match p {
                Letter::Unit => {}
                Letter::Product(v) => flat.extend(v),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => Letter::Unit,
            1 => flat.pop().unwrap(),
            _ => Letter::Product(flat),
        }
    }

    pub fn fin(a: Letter, i: usize, j: usize) -> Letter {
        Letter::Fin(alloc::boxed::Box::new(a), i as u16, j as u16)
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, Letter::Unit)
    }

    /// Whether the letter lies in the finitely supported part `A ⊗ S` of the
    /// outermost suspension.
    pub fn is_finite_part(&self) -> bool {
        match self {
            Letter::Fin(..) => true,
            Letter::Product(v) => v.iter().any(Letter::is_finite_part),
            _ => false,
        }
    }

    /// The Laurent exponent if the letter is a pure Laurent monomial.
    pub fn laurent_exponent(&self) -> Option<i64> {
        match self {
            Letter::Unit => Some(0),
            Letter::Laurent(b) => Some(*b as i64),
            _ => None,
        }
    }
}

/// Whether a grading survives suspension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Evenness {
    Odd,
    /// `γ ⊗ I` anticommutes with `D ⊗ I + F ⊗ N`.
    Even,
    /// The base is even but `γ ⊗ I` fails to anticommute with `F ⊗ N`.
    NotPropagated,
}

/// A leaf triple or a suspension of another triple.
#[derive(Clone, Debug)]
pub enum Triple {
    Base(Arc<SpectralTripleModel>),
    Suspended(Arc<SuspendedTriple>),
}

/// `(Σ²A, H ⊗ l^2(N), D ⊗ I + F ⊗ N)` over a base triple.
#[derive(Clone, Debug)]
pub struct SuspendedTriple {
    pub base: Triple,
    pub inner_cutoff: usize,
    pub generator_index_cap: usize,
    pub p: f64,
    pub evenness: Evenness,
}

/// Generator table and spectrum layout of a realized triple at one level.
#[derive(Clone, Debug, PartialEq)]
pub struct RealizedModel {
    pub level: TowerLevel,
    pub factor_dims: Vec<usize>,
    pub generators: Vec<String>,
    pub eigenvalues: Vec<f64>,
}

impl From<SpectralTripleModel> for Triple {
    fn from(m: SpectralTripleModel) -> Self {
        Triple::Base(Arc::new(m))
    }
}

impl From<SuspendedTriple> for Triple {
    fn from(s: SuspendedTriple) -> Self {
        Triple::Suspended(Arc::new(s))
    }
}

fn diag_n(k: usize) -> SparseMatrix {
    SparseMatrix::diagonal_real(&(0..k).map(|m| m as f64).collect::<Vec<_>>())
}

fn unit_matrix(k: usize, i: usize, j: usize) -> SparseMatrix {
    SparseMatrix::from_triplets(k, k, [(i, j, re(1.0))])
}

impl Triple {
    pub fn depth(&self) -> usize {
        match self {
            Triple::Base(_) => 0,
            Triple::Suspended(s) => s.base.depth() + 1,
        }
    }

    pub fn leaf(&self) -> &SpectralTripleModel {
        match self {
            Triple::Base(m) => m,
            Triple::Suspended(s) => s.base.leaf(),
        }
    }

    pub fn suspension(&self) -> Option<&SuspendedTriple> {
        match self {
            Triple::Base(_) => None,
            Triple::Suspended(s) => Some(s),
        }
    }

    pub fn p(&self) -> f64 {
        match self {
            Triple::Base(m) => m.p,
            Triple::Suspended(s) => s.p,
        }
    }

    pub fn name(&self) -> String {
        match self.depth() {
            0 => self.leaf().name.clone(),
            k => format!("Σ^{}({})", 2 * k, self.leaf().name),
        }
    }

    /// Default inner cutoffs, innermost first.
    pub fn inner_cutoffs(&self) -> Vec<usize> {
        match self {
            Triple::Base(_) => Vec::new(),
            Triple::Suspended(s) => {
                let mut v = s.base.inner_cutoffs();
                v.push(s.inner_cutoff);
                v
            }
        }
    }

    pub fn level(&self, base: usize) -> TowerLevel {
        TowerLevel {
            base,
            inner: self.inner_cutoffs(),
        }
    }

    pub fn factor_dims(&self, lvl: &TowerLevel) -> Vec<usize> {
        let mut d = vec![self.leaf().dim(lvl.base)];
        d.extend(lvl.inner.iter().copied());
        d
    }

    pub fn dim(&self, lvl: &TowerLevel) -> usize {
        self.factor_dims(lvl).iter().product()
    }

    pub fn check_level(&self, lvl: &TowerLevel) -> Result<()> {
        if lvl.inner.len() != self.depth() {
            return Err(Error::InvalidLevel {
                level: lvl.base,
                reason: format!("expected {} inner cutoff(s), got {}", self.depth(), lvl.inner.len()),
            });
        }
        self.leaf().validate_level(lvl.base)?;
        if let Some(&k) = lvl.inner.iter().find(|&&k| k < 4) {
            return Err(Error::InvalidLevel {
                level: k,
                reason: "inner cutoff must be at least 4".to_string(),
            });
        }
        Ok(())
    }

    /// `D` of the tower as a sum of elementary tensors.
    pub fn dirac(&self, lvl: &TowerLevel) -> TensorOp {
        match self {
            Triple::Base(m) => TensorOp::elementary(re(1.0), vec![m.dirac(lvl.base)]),
            Triple::Suspended(s) => {
                let (inner, k) = lvl.pop();
                let d = s.base.dirac(&inner).kron_right(&SparseMatrix::identity(k));
                let fnn = s.base.sign(&inner).kron_right(&diag_n(k));
                d.add(&fnn)
            }
        }
    }

    /// `F = sign(D)`; for suspensions `F ⊗ I` (sign convention `+1`).
    pub fn sign(&self, lvl: &TowerLevel) -> TensorOp {
        match self {
            Triple::Base(m) => TensorOp::elementary(re(1.0), vec![m.sign(lvl.base)]),
            Triple::Suspended(s) => {
                let (inner, k) = lvl.pop();
                s.base.sign(&inner).kron_right(&SparseMatrix::identity(k))
            }
        }
    }

    /// Per-factor diagonals whose sum is `|D|`: `|D_leaf|` and `N` per suspension.
    pub fn abs_factors(&self, lvl: &TowerLevel) -> Vec<Vec<f64>> {
        let mut v = vec![self.leaf().abs_eigenvalues(lvl.base)];
        for &k in &lvl.inner {
            v.push((0..k).map(|m| m as f64).collect());
        }
        v
    }

    /// Diagonal of the realized `D` in Kronecker order.
    pub fn eigenvalues(&self, lvl: &TowerLevel) -> Vec<f64> {
        let d = self.dirac(lvl).to_sparse();
        (0..d.nrows()).map(|i| d.get(i, i).re).collect()
    }

    pub fn realize(&self, letter: &Letter, lvl: &TowerLevel) -> Result<TensorOp> {
        match letter {
            Letter::Unit => Ok(TensorOp::identity(self.factor_dims(lvl))),
            Letter::Product(parts) => {
                let mut acc = TensorOp::identity(self.factor_dims(lvl));
                for p in parts {
                    acc = acc.mul(&self.realize(p, lvl)?);
                    if acc.is_zero() {
                        break;
                    }
                }
                Ok(acc)
            }
            _ => match self {
                Triple::Base(m) => match letter {
                    Letter::Gen(g) if (*g as usize) < m.generators.len() => {
                        Ok(TensorOp::elementary(re(1.0), vec![m.generator(*g as usize, lvl.base)]))
                    }
                    _ => Err(Error::Invalid(format!("letter {letter:?} is not a letter of `{}`", m.name))),
                },
                Triple::Suspended(s) => {
                    let (inner, k) = lvl.pop();
                    match letter {
                        Letter::Fin(a, i, j) => {
                            let (i, j) = (*i as usize, *j as usize);
                            if i >= k || j >= k {
                                return Err(Error::BudgetExceedsTruncation(format!(
                                    "matrix unit e_{i}{j} does not fit inner cutoff {k}"
                                )));
                            }
                            Ok(s.base.realize(a, &inner)?.kron_right(&unit_matrix(k, i, j)))
                        }
                        Letter::Laurent(b) => {
                            let sp = LaurentPoly::monomial(*b as i64, re(1.0)).sigma_prime(k);
                            Ok(TensorOp::identity(s.base.factor_dims(&inner)).kron_right(&sp))
                        }
                        _ => Err(Error::Invalid(format!("letter {letter:?} is not a letter of a suspension"))),
                    }
                }
            },
        }
    }

    /// Non-unit letters within `budget`, in a fixed order.
    pub fn letters(&self, budget: &Budget) -> Result<Vec<Letter>> {
        if budget.suspensions.len() != self.depth() {
            return Err(Error::BudgetMismatch(format!(
                "budget has {} suspension level(s), triple has {}",
                budget.suspensions.len(),
                self.depth()
            )));
        }
        match self {
            Triple::Base(m) => Ok(m
                .generators
                .iter()
                .enumerate()
                .filter(|(_, g)| g.degree <= budget.base_degree)
                .map(|(i, _)| Letter::Gen(i as u16))
                .collect()),
            Triple::Suspended(s) => {
                let sb = budget.outer().unwrap();
                if sb.index_cap > s.generator_index_cap {
                    return Err(Error::BudgetExceedsTruncation(format!(
                        "matrix-unit cap {} exceeds the generator index cap {}",
                        sb.index_cap, s.generator_index_cap
                    )));
                }
                let mut base = vec![Letter::Unit];
                base.extend(s.base.letters(&budget.inner())?);
                let mut out = Vec::new();
                for a in &base {
                    for i in 0..sb.index_cap {
                        for j in 0..sb.index_cap {
                            out.push(Letter::fin(a.clone(), i, j));
                        }
                    }
                }
                for b in 1..=sb.laurent_cap as i32 {
                    out.push(Letter::Laurent(-b));
                    out.push(Letter::Laurent(b));
                }
                Ok(out)
            }
        }
    }

    /// Per-factor shift reach of a letter, used for interior margins.
    pub fn bandwidth(&self, letter: &Letter) -> Vec<usize> {
        let n = self.depth() + 1;
        match letter {
            Letter::Unit => vec![0; n],
            Letter::Product(v) => v.iter().fold(vec![0; n], |mut acc, l| {
                for (a, b) in acc.iter_mut().zip(self.bandwidth(l)) {
                    *a += b;
                }
                acc
            }),
            _ => match self {
                Triple::Base(m) => match letter {
                    Letter::Gen(g) => vec![m.generators.get(*g as usize).map(|g| g.bandwidth).unwrap_or(0)],
                    _ => vec![0],
                },
                Triple::Suspended(s) => match letter {
                    Letter::Fin(a, _, _) => {
                        let mut v = s.base.bandwidth(a);
                        v.push(0);
                        v
                    }
                    Letter::Laurent(b) => {
                        let mut v = vec![0; n];
                        v[n - 1] = b.unsigned_abs() as usize;
                        v
                    }
                    _ => vec![0; n],
                },
            },
        }
    }

    /// Formal adjoint, by symbol.
    pub fn adjoint(&self, letter: &Letter) -> Result<Letter> {
        Ok(match letter {
            Letter::Unit => Letter::Unit,
            Letter::Product(v) => {
                let mut parts = Vec::with_capacity(v.len());
                for l in v.iter().rev() {
                    parts.push(self.adjoint(l)?);
                }
                Letter::product(parts)
            }
            _ => match self {
                Triple::Base(m) => match letter {
                    Letter::Gen(g) => {
                        let gen = &m.generators[*g as usize];
                        let sym = gen.adjoint.as_ref().ok_or_else(|| {
                            Error::Invalid(format!("generator `{}` has no adjoint symbol", gen.symbol))
                        })?;
                        let idx = m.generator_index(sym).ok_or_else(|| {
                            Error::Invalid(format!("adjoint `{sym}` of `{}` is not a generator", gen.symbol))
                        })?;
                        Letter::Gen(idx as u16)
                    }
                    _ => return Err(Error::Invalid(format!("letter {letter:?} is not a letter of `{}`", m.name))),
                },
                Triple::Suspended(s) => match letter {
                    Letter::Fin(a, i, j) => Letter::Fin(alloc::boxed::Box::new(s.base.adjoint(a)?), *j, *i),
                    Letter::Laurent(b) => Letter::Laurent(-b),
                    _ => return Err(Error::Invalid(format!("letter {letter:?} is not a letter of a suspension"))),
                },
            },
        })
    }

    pub fn label(&self, letter: &Letter) -> String {
        match letter {
            Letter::Unit => "1".to_string(),
            Letter::Product(v) => v.iter().map(|l| self.label(l)).collect::<Vec<_>>().join("·"),
            _ => match self {
                Triple::Base(m) => match letter {
                    Letter::Gen(g) => m
                        .generators
                        .get(*g as usize)
                        .map(|g| g.symbol.clone())
                        .unwrap_or_else(|| format!("g{g}")),
                    _ => format!("{letter:?}"),
                },
                Triple::Suspended(s) => match letter {
                    Letter::Fin(a, i, j) => format!("{}⊗e{},{}", s.base.label(a), i, j),
                    Letter::Laurent(b) => format!("σ'(z^{b})"),
                    _ => format!("{letter:?}"),
                },
            },
        }
    }

    /// Per-factor row windows on which products of letters with the given
    /// per-factor reach are computed exactly: away from truncation edges, and in
    /// the base factor of a suspension away from the sign flip of `F`.
    pub fn window(&self, lvl: &TowerLevel, margins: &[usize]) -> Vec<Vec<bool>> {
        let leaf = self.leaf();
        let m0 = margins.first().copied().unwrap_or(0);
        let mut w0 = leaf.interior(lvl.base, m0);
        if self.depth() > 0 && !leaf.is_finite() {
            let f = leaf.sign_diag(lvl.base);
            let n = f.len();
            for (r, keep) in w0.iter_mut().enumerate() {
                let lo = r.saturating_sub(m0);
                let hi = (r + m0).min(n - 1);
                if (lo..=hi).any(|i| f[i] != f[r]) {
                    *keep = false;
                }
            }
        }
        let mut out = vec![w0];
        for (f, &k) in lvl.inner.iter().enumerate() {
            let m = margins.get(f + 1).copied().unwrap_or(0);
            out.push((0..k).map(|r| r + m < k).collect());
        }
        out
    }

    /// Window as a mask on ambient rows (Kronecker order, factor 0 slowest).
    pub fn row_mask(&self, lvl: &TowerLevel, margins: &[usize]) -> Vec<bool> {
        let w = self.window(lvl, margins);
        let mut mask = vec![true];
        for fw in &w {
            let mut next = Vec::with_capacity(mask.len() * fw.len());
            for &a in &mask {
                for &b in fw {
                    next.push(a && b);
                }
            }
            mask = next;
        }
        mask
    }

    /// Margins covering every word with `letters_per_word` letters drawn from `letters`.
    pub fn margins_for(&self, letters: &[Letter], letters_per_word: usize) -> Vec<usize> {
        let mut m = vec![0; self.depth() + 1];
        for l in letters {
            for (a, b) in m.iter_mut().zip(self.bandwidth(l)) {
                *a = (*a).max(b);
            }
        }
        m.iter().map(|x| x * letters_per_word).collect()
    }

    /// Checks that windows for the given margins are nonempty and that matrix
    /// units plus shifts stay inside every inner cutoff.
    pub fn check_window(&self, lvl: &TowerLevel, margins: &[usize], budget: &Budget) -> Result<()> {
        self.check_level(lvl)?;
        let w = self.window(lvl, margins);
        for (f, fw) in w.iter().enumerate() {
            if !fw.iter().any(|&x| x) {
                return Err(Error::BudgetExceedsTruncation(format!(
                    "no interior rows left in factor {f} at level {lvl:?} for margins {margins:?}"
                )));
            }
        }
        for (f, (sb, &k)) in budget.suspensions.iter().zip(&lvl.inner).enumerate() {
            let m = margins.get(f + 1).copied().unwrap_or(0);
            if sb.index_cap + m >= k {
                return Err(Error::BudgetExceedsTruncation(format!(
                    "inner cutoff {k} too small for matrix-unit cap {} plus shift reach {m}",
                    sb.index_cap
                )));
            }
        }
        Ok(())
    }

    pub fn realized_model(&self, lvl: &TowerLevel, budget: &Budget) -> Result<RealizedModel> {
        self.check_level(lvl)?;
        let gens = self.letters(budget)?.iter().map(|l| self.label(l)).collect();
        Ok(RealizedModel {
            level: lvl.clone(),
            factor_dims: self.factor_dims(lvl),
            generators: gens,
            eigenvalues: self.eigenvalues(lvl),
        })
    }
}

/// Suspends `base` with inner truncation `inner_cutoff` and matrix units
/// `e_ij`, `i, j < generator_index_cap`.
pub fn suspend_triple(base: Triple, inner_cutoff: usize, generator_index_cap: usize) -> Result<SuspendedTriple> {
    if inner_cutoff < 4 {
        return Err(Error::InvalidLevel {
            level: inner_cutoff,
            reason: "inner cutoff must be at least 4".to_string(),
        });
    }
    if generator_index_cap == 0 || 2 * generator_index_cap > inner_cutoff {
        return Err(Error::BudgetExceedsTruncation(format!(
            "generator index cap {generator_index_cap} must lie in 1..={}",
            inner_cutoff / 2
        )));
    }
    let leaf = base.leaf();
    let probe = leaf.reference_level.max(4);
    if leaf.sign_zero_convention == SignConvention::Minus && leaf.has_kernel(probe) {
        return Err(Error::SignConvention(
            "suspension needs sign(0) = +1 when D has a kernel, so that |Σ²D| = |D| ⊗ I + I ⊗ N".to_string(),
        ));
    }
    let evenness = match (&base, &leaf.grading) {
        (Triple::Base(m), Some(g)) => {
            let lvl = probe;
            let k = 4;
            let gamma = g.at(lvl).kron(&SparseMatrix::identity(k));
            let d = m.dirac(lvl).kron(&SparseMatrix::identity(k));
            let fnn = m.sign(lvl).kron(&diag_n(k));
            let anti = |x: &SparseMatrix| gamma.mul(x).add(&x.mul(&gamma)).is_zero();
            match (anti(&d), anti(&fnn)) {
                (true, true) => Evenness::Even,
                (true, false) => Evenness::NotPropagated,
                _ => Evenness::Odd,
            }
        }
        _ => Evenness::Odd,
    };
    Ok(SuspendedTriple {
        p: base.p() + 1.0,
        base,
        inner_cutoff,
        generator_index_cap,
        evenness,
    })
}

/// Applies [`suspend_triple`] `k` times with the given cutoffs and index caps,
/// guarding the ambient dimension at the leaf reference level.
pub fn iterate_suspension(
    base: SpectralTripleModel,
    k: usize,
    cutoffs: &[usize],
    index_caps: &[usize],
    max_dim: usize,
) -> Result<Triple> {
    if k == 0 || cutoffs.len() != k || index_caps.len() != k {
        return Err(Error::Invalid(format!(
            "iterate_suspension needs k >= 1 and k cutoffs and index caps (k = {k})"
        )));
    }
    let total = cutoffs
        .iter()
        .fold(base.dim(base.reference_level.max(1)) as u128, |acc, &c| acc * c as u128);
    if total > max_dim as u128 {
        return Err(Error::BudgetExceedsTruncation(format!(
            "ambient dimension {total} exceeds the cap {max_dim}"
        )));
    }
    let mut t: Triple = base.into();
    for (&c, &cap) in cutoffs.iter().zip(index_caps) {
        t = suspend_triple(t, c, cap)?.into();
    }
    Ok(t)
}
