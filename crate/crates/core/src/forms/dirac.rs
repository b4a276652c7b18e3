use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{enumerate_words_over, BudgetSpace, Evaluator, FormWord, DEFAULT_WORD_LIMIT};
use crate::error::{Error, Result};
use crate::linalg::{combine_columns, dense_rank, embed, left_null, SparseVec, C64, DEFAULT_RANK_TOL};
use crate::qds::{Budget, Letter, TowerLevel, Triple};

/// Evaluation settings shared by the dimension reports.
#[derive(Clone, Debug, PartialEq)]
pub struct DiracOptions {
    /// Base truncation levels, ascending; inner cutoffs are the triple defaults.
    pub levels: Vec<usize>,
    pub tol: f64,
    pub word_limit: u128,
}

impl DiracOptions {
    pub fn new(levels: Vec<usize>) -> Self {
        Self {
            levels,
            tol: DEFAULT_RANK_TOL,
            word_limit: DEFAULT_WORD_LIMIT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelDims {
    pub level: usize,
    pub pi_omega: usize,
    /// `dim(π(Ωᵏ) ∩ π(dJ₀))`.
    pub junk: usize,
    pub omega: usize,
    pub marginal: bool,
    pub sketched: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeReport {
    pub degree: usize,
    pub words: usize,
    pub junk_words: usize,
    pub kernel_dim: usize,
    pub per_level: Vec<LevelDims>,
    pub pi_omega: usize,
    pub junk: usize,
    pub omega: usize,
    pub stabilized: bool,
    pub marginal: bool,
    /// Extra level evaluated because of a marginal rank.
    pub rerun_level: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiracDgaReport {
    pub triple: String,
    pub budget: Budget,
    pub degrees: Vec<DegreeReport>,
}

impl DiracDgaReport {
    pub fn omega(&self, degree: usize) -> Option<usize> {
        self.degrees.iter().find(|d| d.degree == degree).map(|d| d.omega)
    }
}

/// Kernel words of degree `k − 1` and the images `π(d·)` of the kernel at
/// every level.
#[derive(Clone, Debug)]
pub struct JunkSpace {
    pub degree: usize,
    pub letters: Vec<Letter>,
    pub words: Vec<FormWord>,
    /// Coefficient vectors over `words`, vanishing under `π` at every level.
    pub kernel: Vec<Vec<C64>>,
    pub levels: Vec<TowerLevel>,
    pub members: Vec<Vec<SparseVec>>,
}

/// Letters and pairwise products of letters, deduplicated by their realized
/// value on the exact window at `level`.
pub fn algebra_products(triple: &Triple, letters: &[Letter], level: &TowerLevel) -> Result<Vec<Letter>> {
    let mut cands: Vec<Letter> = letters.to_vec();
    for a in letters {
        for b in letters {
            cands.push(Letter::product(vec![a.clone(), b.clone()]));
        }
    }
    let margins = triple.margins_for(letters, 2);
    let mask = triple.row_mask(level, &margins);
    let mut seen: Vec<SparseVec> = vec![vec_of(triple, &Letter::Unit, level, &mask)?];
    let mut out = Vec::new();
    for c in cands {
        if c.is_unit() {
            continue;
        }
        let v = vec_of(triple, &c, level, &mask)?;
        if v.max_abs() < 1e-12 {
            continue;
        }
        if seen.iter().any(|s| s.idx == v.idx && s.sub(&v).max_abs() < 1e-12 * v.max_abs().max(1.0)) {
            continue;
        }
        seen.push(v);
        out.push(c);
    }
    Ok(out)
}

fn vec_of(triple: &Triple, l: &Letter, level: &TowerLevel, mask: &[bool]) -> Result<SparseVec> {
    Ok(SparseVec::from_matrix(&triple.realize(l, level)?.to_sparse(), |r| mask[r]))
}

fn junk_letters(triple: &Triple, letters: &[Letter], degree: usize, level: &TowerLevel) -> Result<Vec<Letter>> {
    if degree <= 1 {
        Ok(letters.to_vec())
    } else {
        algebra_products(triple, letters, level)
    }
}

fn sorted_levels(triple: &Triple, levels: &[usize]) -> Result<Vec<TowerLevel>> {
    if levels.is_empty() {
        return Err(Error::Invalid(String::from("at least one level is required")));
    }
    let mut ls = levels.to_vec();
    ls.sort_unstable();
    ls.dedup();
    Ok(ls.into_iter().map(|l| triple.level(l)).collect())
}

fn max_margins(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().zip(b).map(|(x, y)| *x.max(y)).collect()
}

/// Junk in degree `degree` generated by kernel words over `jl`, evaluated on
/// the rows of `masks[i]` at `levels[i]`.
pub(crate) fn junk_over(
    triple: &Triple,
    degree: usize,
    jl: &[Letter],
    levels: &[TowerLevel],
    masks: &[Vec<bool>],
    tol: f64,
    limit: u128,
) -> Result<JunkSpace> {
    let words = if degree == 0 {
        Vec::new()
    } else {
        enumerate_words_over(jl, degree - 1, limit)?
    };
    let top = levels.len() - 1;
    let mut empty = JunkSpace {
        degree,
        letters: jl.to_vec(),
        words: words.clone(),
        kernel: Vec::new(),
        levels: levels.to_vec(),
        members: vec![Vec::new(); levels.len()],
    };
    if words.is_empty() {
        return Ok(empty);
    }
    let mut ev_top = Evaluator::new(triple, levels[top].clone())?;
    let e_top = ev_top.vectors(&words, &masks[top])?;
    let kernel = left_null(&e_top, tol);
    for (i, lvl) in levels.iter().enumerate().take(top) {
        let mut ev = Evaluator::new(triple, lvl.clone())?;
        let e = ev.vectors(&words, &masks[i])?;
        let vmax = e.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for c in &kernel {
            let refs: Vec<&SparseVec> = e.iter().collect();
            let r = SparseVec::combination(&refs, c).norm();
            let scale: f64 = c.iter().zip(&e).map(|(x, v)| x.norm() * v.norm()).sum();
            let floor = c.iter().map(|x| x.norm()).fold(0.0, f64::max) * vmax;
            if r > 1e-8 * scale.max(floor).max(1e-300) {
                return Err(Error::JunkKernelUnstable(format!(
                    "degree {degree}: a kernel relation at level {:?} fails at level {:?} (residual {r:.3e})",
                    levels[top], lvl
                )));
            }
        }
    }
    if kernel.is_empty() {
        return Ok(empty);
    }
    let dwords: Vec<FormWord> = words.iter().map(FormWord::d).collect();
    let coeffs = DMatrix::from_fn(words.len(), kernel.len(), |i, j| kernel[j][i]);
    let mut members = Vec::with_capacity(levels.len());
    for (i, lvl) in levels.iter().enumerate() {
        let mut ev = Evaluator::new(triple, lvl.clone())?;
        let dv = ev.vectors(&dwords, &masks[i])?;
        members.push(combine_columns(&dv, &coeffs).into_iter().filter(|v| v.max_abs() > 0.0).collect());
    }
    empty.kernel = kernel;
    empty.members = members;
    Ok(empty)
}

/// Margins making every degree-`degree` word over `letters` and every junk
/// image over `jl` exact.
fn degree_margins(triple: &Triple, letters: &[Letter], jl: &[Letter], degree: usize) -> Vec<usize> {
    max_margins(&triple.margins_for(letters, degree + 1), &triple.margins_for(jl, degree))
}

/// `π(dJ₀^{k−1})` at each level, with kernel words over products of two
/// budget letters (budget letters alone in degree 1).
pub fn junk_space(triple: &Triple, degree: usize, budget: &Budget, opts: &DiracOptions) -> Result<JunkSpace> {
    let levels = sorted_levels(triple, &opts.levels)?;
    let letters = triple.letters(budget)?;
    let jl = junk_letters(triple, &letters, degree, levels.last().unwrap())?;
    let margins = degree_margins(triple, &letters, &jl, degree);
    let masks = window_masks(triple, &levels, &margins, budget)?;
    junk_over(triple, degree, &jl, &levels, &masks, opts.tol, opts.word_limit)
}

fn window_masks(triple: &Triple, levels: &[TowerLevel], margins: &[usize], budget: &Budget) -> Result<Vec<Vec<bool>>> {
    levels
        .iter()
        .map(|l| {
            triple.check_window(l, margins, budget)?;
            Ok(triple.row_mask(l, margins))
        })
        .collect()
}

pub(crate) struct QuotientRanks {
    pub v: usize,
    pub j: usize,
    pub union: usize,
    pub marginal: bool,
    pub sketched: bool,
}

/// Ranks of `V`, `J` and `V ∪ J` in one consistent embedding.
pub(crate) fn quotient_ranks(v: &[SparseVec], j: &[SparseVec], tol: f64) -> QuotientRanks {
    let e = embed(&[v, j]);
    let (a, b) = (&e.groups[0], &e.groups[1]);
    let mut u = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    u.rows_mut(0, a.nrows()).copy_from(a);
    u.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    let (ra, rb, ru) = (
        dense_rank(a, tol, e.sketched),
        dense_rank(b, tol, e.sketched),
        dense_rank(&u, tol, e.sketched),
    );
    QuotientRanks {
        v: ra.rank,
        j: rb.rank,
        union: ru.rank,
        marginal: ra.marginal || rb.marginal || ru.marginal,
        sketched: e.sketched,
    }
}

fn degree_report(
    triple: &Triple,
    degree: usize,
    budget: &Budget,
    letters: &[Letter],
    base_levels: &[usize],
    opts: &DiracOptions,
) -> Result<DegreeReport> {
    let levels = sorted_levels(triple, base_levels)?;
    let jl = junk_letters(triple, letters, degree, levels.last().unwrap())?;
    let margins = degree_margins(triple, letters, &jl, degree);
    let masks = window_masks(triple, &levels, &margins, budget)?;
    let words = enumerate_words_over(letters, degree, opts.word_limit)?;
    let junk = junk_over(triple, degree, &jl, &levels, &masks, opts.tol, opts.word_limit)?;
    let mut per_level = Vec::with_capacity(levels.len());
    for (i, lvl) in levels.iter().enumerate() {
        let mut ev = Evaluator::new(triple, lvl.clone())?;
        let mut v = ev.spanning_vectors(&words, &masks[i])?;
        if let Some(w) = BudgetSpace::new(triple, budget, lvl, degree, &masks[i])? {
            v = w.intersect(&v, opts.tol);
        }
        let q = quotient_ranks(&v, &junk.members[i], opts.tol);
        per_level.push(LevelDims {
            level: lvl.base,
            pi_omega: q.v,
            junk: q.v + q.j - q.union,
            omega: q.union - q.j,
            marginal: q.marginal,
            sketched: q.sketched,
        });
    }
    let settled: Vec<&LevelDims> = per_level.iter().filter(|l| !l.marginal).collect();
    let pick = settled.last().copied().unwrap_or_else(|| per_level.last().unwrap());
    let stabilized = settled.len() >= 3
        && settled
            .iter()
            .all(|l| l.omega == pick.omega && l.pi_omega == pick.pi_omega && l.junk == pick.junk);
    Ok(DegreeReport {
        degree,
        words: words.len(),
        junk_words: junk.words.len(),
        kernel_dim: junk.kernel.len(),
        pi_omega: pick.pi_omega,
        junk: pick.junk,
        omega: pick.omega,
        stabilized,
        marginal: settled.is_empty(),
        rerun_level: None,
        per_level,
    })
}

/// Runs the level and window checks of [`dirac_dga_dims`] for every degree,
/// including the extra level a marginal rank would add, without computing ranks.
pub fn check_dirac_windows(triple: &Triple, max_degree: usize, budget: &Budget, opts: &DiracOptions) -> Result<()> {
    let letters = triple.letters(budget)?;
    let mut ls = opts.levels.clone();
    ls.sort_unstable();
    ls.dedup();
    if let [.., a, b] = ls[..] {
        ls.push(b + (b - a).max(1));
    } else if let [b] = ls[..] {
        ls.push(b + 8);
    }
    let levels = sorted_levels(triple, &ls)?;
    for k in 0..=max_degree {
        let jl = junk_letters(triple, &letters, k, levels.last().unwrap())?;
        let margins = degree_margins(triple, &letters, &jl, k);
        window_masks(triple, &levels, &margins, budget)?;
    }
    Ok(())
}

/// Dimensions of `π(Ωᵏ)`, its junk, and `Ω_Dᵏ = π(Ωᵏ)/π(dJ₀^{k−1})` for
/// `k ≤ max_degree` at each level. A marginal rank triggers one rerun with an
/// extra level.
pub fn dirac_dga_dims(triple: &Triple, max_degree: usize, budget: &Budget, opts: &DiracOptions) -> Result<DiracDgaReport> {
    let letters = triple.letters(budget)?;
    let mut degrees = Vec::with_capacity(max_degree + 1);
    for k in 0..=max_degree {
        let mut r = degree_report(triple, k, budget, &letters, &opts.levels, opts)?;
        if r.per_level.iter().any(|l| l.marginal) {
            let mut ls = opts.levels.clone();
            ls.sort_unstable();
            let last = *ls.last().unwrap();
            let step = if ls.len() >= 2 { last - ls[ls.len() - 2] } else { 8 };
            let extra = last + step.max(1);
            ls.push(extra);
            r = degree_report(triple, k, budget, &letters, &ls, opts)?;
            r.rerun_level = Some(extra);
        }
        degrees.push(r);
    }
    Ok(DiracDgaReport {
        triple: triple.name(),
        budget: budget.clone(),
        degrees,
    })
}

/// One row of a filtration table: `dim Ωᵖ(Aₙ)/(Ωᵖ(Aₙ₋₁) + Jᵖ'ⁿ)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedRow {
    pub step: usize,
    pub degree: usize,
    pub dim: usize,
}

/// Graded pieces of a filtration given by nested letter sets, the first of
/// which may be empty (`A₋₁ = ℂ·1`).
pub fn graded_dims(
    triple: &Triple,
    filtration: &[Vec<Letter>],
    degree: usize,
    budget: &Budget,
    opts: &DiracOptions,
) -> Result<Vec<GradedRow>> {
    for w in filtration.windows(2) {
        if !w[0].iter().all(|l| w[1].contains(l)) {
            return Err(Error::Invalid(String::from("filtration steps must be nested")));
        }
    }
    let levels = sorted_levels(triple, &opts.levels)?;
    let top = levels.last().unwrap();
    let all = filtration.last().cloned().unwrap_or_default();
    let jl_all = junk_letters(triple, &all, degree, top)?;
    let margins = degree_margins(triple, &all, &jl_all, degree);
    triple.check_window(top, &margins, budget)?;
    let mask = triple.row_mask(top, &margins);
    let mut ev = Evaluator::new(triple, top.clone())?;
    let mut prev: Vec<SparseVec> = ev.vectors(&enumerate_words_over(&[], degree, opts.word_limit)?, &mask)?;
    let mut rows = Vec::new();
    for (n, step) in filtration.iter().enumerate() {
        let cur = ev.vectors(&enumerate_words_over(step, degree, opts.word_limit)?, &mask)?;
        let jl = junk_letters(triple, step, degree, top)?;
        let junk = junk_over(
            triple,
            degree,
            &jl,
            core::slice::from_ref(top),
            core::slice::from_ref(&mask),
            opts.tol,
            opts.word_limit,
        )?;
        let mut lower = prev.clone();
        lower.extend(junk.members[0].iter().cloned());
        let mut upper = lower.clone();
        upper.extend(cur.iter().cloned());
        let q = quotient_ranks(&upper, &lower, opts.tol);
        rows.push(GradedRow {
            step: n,
            degree,
            dim: q.v - q.j,
        });
        prev = cur;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triple::make_circle_triple;

    fn circle() -> Triple {
        make_circle_triple(48, 3).unwrap().into()
    }

    #[test]
    fn circle_degree_one_has_four_d_plus_one() {
        let t = circle();
        let r = dirac_dga_dims(&t, 1, &Budget::leaf(3), &DiracOptions::new(vec![24, 32])).unwrap();
        assert_eq!(r.omega(0), Some(7));
        assert_eq!(r.degrees[1].pi_omega, 13);
        assert_eq!(r.degrees[1].junk, 0);
        assert_eq!(r.omega(1), Some(13));
    }

    #[test]
    fn products_of_circle_letters_are_deduplicated() {
        let t = circle();
        let ls = t.letters(&Budget::leaf(2)).unwrap();
        let p = algebra_products(&t, &ls, &t.level(32)).unwrap();
        assert_eq!(p.len(), 8);
    }

    #[test]
    fn one_step_filtration_counts_monomials() {
        let t = circle();
        let ls = t.letters(&Budget::leaf(2)).unwrap();
        let rows = graded_dims(&t, &[Vec::new(), ls], 0, &Budget::leaf(2), &DiracOptions::new(vec![32])).unwrap();
        assert_eq!(rows[1].dim, 4);
        assert_eq!(rows[0].dim, 0);
    }
}
