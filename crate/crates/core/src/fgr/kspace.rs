use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::heat::{heat_oint, heat_weights, richardson, HeatLimit, HeatSchedule};
use crate::error::{Error, Result};
use crate::forms::{enumerate_words_over, Evaluator, FormExpr, FormWord, DEFAULT_WORD_LIMIT};
use crate::linalg::{hermitian_eigen, orthonormalize_columns, CMatrix, SparseMatrix, C64};
use crate::qds::{Budget, Letter, TensorOp, TowerLevel, Triple};

/// Relative K-membership tolerance against `∮ I`.
pub const DEFAULT_K_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_FACTOR_DIM: usize = 1 << 15;
/// Above this many words a degree is spanned from the previous degree.
pub const DEFAULT_FULL_GRAM_LIMIT: usize = 1200;

#[derive(Clone, Debug, PartialEq)]
pub struct FgrOptions {
    pub schedule: HeatSchedule,
    pub k_tol: f64,
    pub max_factor_dim: usize,
    pub word_limit: u128,
    pub full_gram_limit: usize,
}

impl FgrOptions {
    pub fn new(schedule: HeatSchedule) -> Self {
        Self {
            schedule,
            k_tol: DEFAULT_K_TOL,
            max_factor_dim: DEFAULT_MAX_FACTOR_DIM,
            word_limit: DEFAULT_WORD_LIMIT,
            full_gram_limit: DEFAULT_FULL_GRAM_LIMIT,
        }
    }

    /// `t₀ = 0.125`, ratio 2, six nodes, order 4.
    pub fn default_schedule() -> HeatSchedule {
        HeatSchedule::geometric(0.125, 2.0, 6, 4).expect("valid default schedule")
    }
}

impl Default for FgrOptions {
    fn default() -> Self {
        Self::new(Self::default_schedule())
    }
}

/// `λ` is marginal against threshold `thr` when `thr/10 < λ ≤ 10·thr`.
pub fn is_marginal(value: f64, thr: f64) -> bool {
    value > thr / 10.0 && value <= 10.0 * thr
}

/// `lim t^p Tr(u* v e^{−t|D|})`.
pub fn heat_oint_inner(
    triple: &Triple,
    u: &dyn Fn(&TowerLevel) -> Result<TensorOp>,
    v: &dyn Fn(&TowerLevel) -> Result<TensorOp>,
    schedule: &HeatSchedule,
    max_factor_dim: usize,
) -> Result<HeatLimit> {
    let levels = schedule.bind(triple, 1, max_factor_dim)?;
    let p = triple.p();
    let mut samples = Vec::with_capacity(levels.len());
    for (&t, lvl) in schedule.t_values.iter().zip(&levels) {
        let w = heat_weights(triple, lvl, t);
        samples.push((t, u(lvl)?.inner_weighted(&v(lvl)?, &w) * libm::pow(t, p)));
    }
    let scale = samples.iter().map(|s| s.1.norm()).fold(0.0, f64::max);
    let vals: Vec<C64> = samples.iter().map(|s| s.1).collect();
    let (value, error_estimate) = richardson(&vals, schedule.ratio, schedule.order, scale)?;
    Ok(HeatLimit {
        value,
        error_estimate,
        samples,
        order: schedule.order,
    })
}

fn identity_scale(triple: &Triple, schedule: &HeatSchedule, max_factor_dim: usize) -> Result<f64> {
    let id = |l: &TowerLevel| Ok(TensorOp::identity(triple.factor_dims(l)));
    let h = heat_oint(triple, &id, schedule, max_factor_dim)?;
    if !(h.value.re > 0.0) {
        return Err(Error::FunctionalInconsistent(format!("∮ I = {} is not positive", h.value)));
    }
    Ok(h.value.re)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MembershipVerdict {
    pub member: bool,
    pub marginal: bool,
    /// `∮ π(ω)* π(ω)` on the final schedule.
    pub value: HeatLimit,
    pub threshold: f64,
    pub refined: bool,
    pub schedule: HeatSchedule,
}

/// `ω ∈ K` iff `|∮ π(ω)* π(ω)| ≤ k_tol · ∮ I`; a marginal value triggers one
/// schedule refinement.
pub fn k_membership(triple: &Triple, omega: &FormExpr, opts: &FgrOptions) -> Result<MembershipVerdict> {
    let eval = |l: &TowerLevel| Evaluator::new(triple, l.clone())?.expr(omega);
    let mut schedule = opts.schedule.clone();
    let mut refined = false;
    loop {
        let thr = opts.k_tol * identity_scale(triple, &schedule, opts.max_factor_dim)?;
        let value = heat_oint_inner(triple, &eval, &eval, &schedule, opts.max_factor_dim)?;
        let v = value.value.norm();
        let marginal = is_marginal(v, thr);
        if marginal && !refined {
            schedule = schedule.refine();
            refined = true;
            continue;
        }
        return Ok(MembershipVerdict {
            member: v <= thr,
            marginal,
            value,
            threshold: thr,
            refined,
            schedule,
        });
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossTermRow {
    pub sample: usize,
    pub value: HeatLimit,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossTermReport {
    pub threshold: f64,
    pub rows: Vec<CrossTermRow>,
}

impl CrossTermReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> Vec<String> {
        self.rows
            .iter()
            .filter(|r| !r.pass)
            .map(|r| format!("sample {}: |∮(F⊗1)π(ω)| = {:.3e}", r.sample, r.value.value.norm()))
            .collect()
    }
}

/// `|∮ (F⊗1) π(ω)| ≤ k_tol · ∮ I` for every sample.
pub fn cross_term_vanishing(triple: &Triple, samples: &[FormExpr], opts: &FgrOptions) -> Result<CrossTermReport> {
    if triple.suspension().is_none() {
        return Err(Error::Invalid(String::from("cross terms are defined for suspensions only")));
    }
    let threshold = opts.k_tol * identity_scale(triple, &opts.schedule, opts.max_factor_dim)?;
    let mut rows = Vec::with_capacity(samples.len());
    for (i, omega) in samples.iter().enumerate() {
        let v = |l: &TowerLevel| Ok(triple.sign(l).mul(&Evaluator::new(triple, l.clone())?.expr(omega)?));
        let value = heat_oint(triple, &v, &opts.schedule, opts.max_factor_dim)?;
        let pass = value.value.norm() <= threshold;
        rows.push(CrossTermRow { sample: i, value, pass });
    }
    Ok(CrossTermReport { threshold, rows })
}

/// A named operator family for [`functional_consistency`].
pub struct FunctionalSample<'a> {
    pub label: String,
    pub op: &'a dyn Fn(&TowerLevel) -> Result<TensorOp>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyRow {
    pub label: String,
    pub oint: HeatLimit,
    pub int: HeatLimit,
    /// `∮v / (∫v · ∮I)`; `None` when `∫v` vanishes within its error estimate.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub oint_identity: f64,
    pub rows: Vec<ConsistencyRow>,
    pub consistent: bool,
    pub verdict: String,
}

/// Compares `∮` against `∫` on positive samples: both are proportional to
/// one trace exactly when every ratio `∮v / (∫v · ∮I)` is 1 within 5%.
pub fn functional_consistency(
    triple: &Triple,
    samples: &[FunctionalSample<'_>],
    int_schedule: &HeatSchedule,
    oint_schedule: &HeatSchedule,
    max_factor_dim: usize,
) -> Result<ConsistencyReport> {
    let oint_identity = identity_scale(triple, oint_schedule, max_factor_dim)?;
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        let oint = heat_oint(triple, s.op, oint_schedule, max_factor_dim)?;
        let int = super::heat::heat_int(triple, s.op, int_schedule, max_factor_dim)?;
        let ratio = (int.value.norm() > f64::max(1e-9, 10.0 * int.error_estimate)).then(|| oint.value.re / (int.value.re * oint_identity));
        rows.push(ConsistencyRow {
            label: s.label.clone(),
            oint,
            int,
            ratio,
        });
    }
    let consistent = rows.iter().filter_map(|r| r.ratio).all(|r| (r - 1.0).abs() <= 0.05);
    let verdict = String::from(if consistent { "consistent" } else { "inconsistent" });
    Ok(ConsistencyReport {
        oint_identity,
        rows,
        consistent,
        verdict,
    })
}

/// Distinct normalized factor matrices, one dictionary per tensor factor.
struct AtomBook {
    atoms: Vec<Vec<SparseMatrix>>,
    index: Vec<BTreeMap<u64, Vec<u32>>>,
}

/// A tensor operator as `Σ c · atom[i₀] ⊗ atom[i₁] ⊗ …`.
type Expanded = Vec<(C64, Vec<u32>)>;

impl AtomBook {
    fn new(factors: usize) -> Self {
        Self {
            atoms: vec![Vec::new(); factors],
            index: vec![BTreeMap::new(); factors],
        }
    }

    fn atom(&mut self, f: usize, m: SparseMatrix) -> u32 {
        let h = m.content_hash();
        let bucket = self.index[f].entry(h).or_default();
        if let Some(&i) = bucket.iter().find(|&&i| self.atoms[f][i as usize] == m) {
            return i;
        }
        let i = self.atoms[f].len() as u32;
        bucket.push(i);
        self.atoms[f].push(m);
        i
    }

    fn expand(&mut self, x: &TensorOp) -> Expanded {
        let mut merged: BTreeMap<Vec<u32>, C64> = BTreeMap::new();
        for t in &x.terms {
            let mut c = t.coeff;
            let mut ids = Vec::with_capacity(t.factors.len());
            for (f, m) in t.factors.iter().enumerate() {
                let Some((_, _, lead)) = m.iter().next() else {
                    c = C64::new(0.0, 0.0);
                    break;
                };
                c *= lead;
                ids.push(self.atom(f, m.div_scalar(lead)));
            }
            if c != C64::new(0.0, 0.0) {
                *merged.entry(ids).or_insert(C64::new(0.0, 0.0)) += c;
            }
        }
        merged.into_iter().filter(|(_, c)| c.norm() > 0.0).map(|(k, c)| (c, k)).collect()
    }

    /// Per factor, the row-major table `Tr(a_i* a_j W_f)`.
    fn tables(&self, weights: &[Vec<f64>]) -> Vec<Vec<C64>> {
        self.atoms
            .iter()
            .zip(weights)
            .map(|(atoms, w)| {
                let n = atoms.len();
                let mut t = vec![C64::new(0.0, 0.0); n * n];
                for i in 0..n {
                    for j in i..n {
                        let v = atoms[i].inner_weighted(&atoms[j], w);
                        t[i * n + j] = v;
                        t[j * n + i] = v.conj();
                    }
                }
                t
            })
            .collect()
    }
}

/// `G_uv = Σ c̄_a c_b Π_f T_f[a_f, b_f]`, Hermitian by construction.
fn gram_from_tables(ex: &[Expanded], tables: &[Vec<C64>], sizes: &[usize]) -> CMatrix {
    let n = ex.len();
    let mut g = CMatrix::zeros(n, n);
    for u in 0..n {
        for v in u..n {
            let mut s = C64::new(0.0, 0.0);
            for (ca, a) in &ex[u] {
                for (cb, b) in &ex[v] {
                    let mut prod = ca.conj() * cb;
                    for f in 0..sizes.len() {
                        prod *= tables[f][a[f] as usize * sizes[f] + b[f] as usize];
                        if prod == C64::new(0.0, 0.0) {
                            break;
                        }
                    }
                    s += prod;
                }
            }
            g[(u, v)] = s;
            g[(v, u)] = s.conj();
        }
    }
    g
}

/// An extrapolated `∮`-Gram matrix with entrywise error estimates.
#[derive(Clone, Debug)]
pub struct HeatGram {
    pub value: CMatrix,
    pub error: CMatrix,
    pub levels: Vec<TowerLevel>,
}

impl HeatGram {
    /// Frobenius norm of the entrywise error estimates.
    pub fn error_norm(&self) -> f64 {
        libm::sqrt(self.error.iter().map(|e| e.re * e.re).sum::<f64>())
    }
}

/// `∮ π(x_u)* π(x_v)` for operator families `x`, evaluated through per-factor
/// atom dictionaries at every schedule node.
pub fn heat_gram(
    triple: &Triple,
    ops: &dyn Fn(&TowerLevel) -> Result<Vec<TensorOp>>,
    schedule: &HeatSchedule,
    max_factor_dim: usize,
) -> Result<HeatGram> {
    let levels = schedule.bind(triple, 1, max_factor_dim)?;
    let p = triple.p();
    let mut samples: Vec<CMatrix> = Vec::with_capacity(levels.len());
    for (&t, lvl) in schedule.t_values.iter().zip(&levels) {
        let xs = ops(lvl)?;
        let mut book = AtomBook::new(triple.factor_dims(lvl).len());
        let ex: Vec<Expanded> = xs.iter().map(|x| book.expand(x)).collect();
        let tables = book.tables(&heat_weights(triple, lvl, t));
        let sizes: Vec<usize> = book.atoms.iter().map(Vec::len).collect();
        samples.push(gram_from_tables(&ex, &tables, &sizes) * C64::new(libm::pow(t, p), 0.0));
    }
    let n = samples[0].nrows();
    let scale = samples.iter().flat_map(|m| m.iter().map(|x| x.norm())).fold(0.0, f64::max);
    let mut value = CMatrix::zeros(n, n);
    let mut error = CMatrix::zeros(n, n);
    let mut col = vec![C64::new(0.0, 0.0); samples.len()];
    for u in 0..n {
        for v in u..n {
            for (k, m) in samples.iter().enumerate() {
                col[k] = m[(u, v)];
            }
            let (x, e) = richardson(&col, schedule.ratio, schedule.order, scale)?;
            value[(u, v)] = x;
            value[(v, u)] = x.conj();
            error[(u, v)] = C64::new(e, 0.0);
            error[(v, u)] = C64::new(e, 0.0);
        }
    }
    Ok(HeatGram { value, error, levels })
}

/// Number of eigenvalues of `Q* G Q` above `thr`, and the marginal count.
fn rank_on(g: &CMatrix, q: &CMatrix, thr: f64) -> (usize, usize) {
    if q.ncols() == 0 {
        return (0, 0);
    }
    let h = q.adjoint() * g * q;
    let e = hermitian_eigen(&h);
    let rank = e.values.iter().filter(|&&l| l > thr).count();
    let marginal = e.values.iter().filter(|&&l| is_marginal(l, thr)).count();
    (rank, marginal)
}

fn pad_rows(m: &CMatrix, rows: usize) -> CMatrix {
    let mut out = CMatrix::zeros(rows, m.ncols());
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    out
}

fn hstack(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.view_mut((0, a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    out
}

fn unit_columns(n: usize, range: core::ops::Range<usize>) -> CMatrix {
    let mut out = CMatrix::zeros(n, range.len());
    for (k, i) in range.enumerate() {
        out[(i, k)] = C64::new(1.0, 0.0);
    }
    out
}

/// Pivoted Cholesky: words whose seminorm images span `Ωⁿ/Kⁿ`.
fn seminorm_pivots(g: &CMatrix, thr: f64) -> Vec<usize> {
    let n = g.nrows();
    let mut a = g.clone();
    let mut picked = Vec::new();
    let mut used = vec![false; n];
    loop {
        let best = (0..n).filter(|&i| !used[i]).max_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
        let Some(k) = best else { break };
        let piv = a[(k, k)].re;
        if piv <= thr {
            break;
        }
        used[k] = true;
        picked.push(k);
        let col: Vec<C64> = (0..n).map(|i| a[(i, k)]).collect();
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] -= col[i] * col[j].conj() / piv;
            }
        }
    }
    picked.sort_unstable();
    picked
}

/// Dimensions of one degree of the FGR dga.
#[derive(Clone, Debug, PartialEq)]
pub struct KSpaceDegree {
    pub degree: usize,
    pub words: Vec<FormWord>,
    /// Spanned from the previous degree instead of full enumeration.
    pub reduced: bool,
    /// `dim Ωⁿ/Kⁿ` over the word space.
    pub gram_rank: usize,
    /// Coefficient vectors spanning `Kⁿ`.
    pub kernel: Vec<Vec<C64>>,
    pub dk_rank: usize,
    /// `dim(Kⁿ + dK^{n−1})` over the word space.
    pub k_plus_dk: usize,
    /// `dim Ωⁿ/(Kⁿ + dK^{n−1})` over all words.
    pub omega_full: usize,
    /// Budget targets `F^n ⊗ σ'(z^e)`, `|e| ≤ laurent cap`.
    pub targets: usize,
    /// The part of the quotient inside the budget targets.
    pub omega: usize,
    pub marginal: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub threshold: f64,
    pub gram_error: f64,
    pub gram: CMatrix,
}

impl KSpaceDegree {
    pub fn kernel_dim(&self) -> usize {
        self.kernel.len()
    }

    /// `c* G c` for a coefficient vector over `words`.
    pub fn seminorm(&self, c: &[C64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(c);
        (v.adjoint() * &self.gram * &v)[(0, 0)].re
    }

    /// Smallest eigenvalue of the Gram matrix restricted to the words at `idx`;
    /// above `threshold` iff no nonzero combination of them lies in `Kⁿ`.
    pub fn restricted_min_eigenvalue(&self, idx: &[usize]) -> f64 {
        if idx.is_empty() {
            return f64::INFINITY;
        }
        let g = CMatrix::from_fn(idx.len(), idx.len(), |i, j| self.gram[(idx[i], idx[j])]);
        hermitian_eigen(&g).values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KSpaceReport {
    pub triple: String,
    pub budget: Budget,
    pub schedule: HeatSchedule,
    pub k_tol: f64,
    pub refined: bool,
    pub degrees: Vec<KSpaceDegree>,
}

impl KSpaceReport {
    pub fn omega(&self, degree: usize) -> Option<usize> {
        self.degrees.iter().find(|d| d.degree == degree).map(|d| d.omega)
    }

    pub fn omegas(&self) -> Vec<usize> {
        self.degrees.iter().map(|d| d.omega).collect()
    }

    pub fn marginal(&self) -> usize {
        self.degrees.iter().map(|d| d.marginal).sum()
    }
}

fn word_key(w: &FormWord) -> Vec<Letter> {
    w.letters.clone()
}

/// Words of degree `n`: all of them when few enough, otherwise pivot words of
/// degree `n − 1` times one more differential, together with `d` of every
/// degree `n − 1` word.
fn degree_words(letters: &[Letter], n: usize, prev: Option<(&KSpaceDegree, &[usize])>, opts: &FgrOptions) -> Result<(Vec<FormWord>, bool)> {
    let nl = letters.len() as u128;
    let count = (nl + 1).saturating_mul(nl.saturating_pow(n as u32));
    if count <= opts.full_gram_limit as u128 || prev.is_none() {
        return Ok((enumerate_words_over(letters, n, opts.word_limit)?, false));
    }
    let (prev, pivots) = prev.unwrap();
    let mut out: Vec<FormWord> = Vec::new();
    let mut seen: BTreeMap<Vec<Letter>, ()> = BTreeMap::new();
    let mut push = |w: FormWord, out: &mut Vec<FormWord>| {
        if !w.is_trivial() && seen.insert(word_key(&w), ()).is_none() {
            out.push(w);
        }
    };
    for &i in pivots {
        for l in letters {
            let mut w = prev.words[i].clone();
            w.letters.push(l.clone());
            w.coeff = C64::new(1.0, 0.0);
            push(w, &mut out);
        }
    }
    for w in &prev.words {
        if !w.letters[0].is_unit() {
            let mut dw = w.d();
            dw.coeff = C64::new(1.0, 0.0);
            push(dw, &mut out);
        }
    }
    Ok((out, true))
}

/// Coefficients of `dK^{n−1}` over the degree-`n` words.
fn dk_columns(prev: &KSpaceDegree, words: &[FormWord]) -> CMatrix {
    let index: BTreeMap<Vec<Letter>, usize> = words.iter().enumerate().map(|(i, w)| (word_key(w), i)).collect();
    let mut m = CMatrix::zeros(words.len(), prev.kernel.len());
    for (j, k) in prev.kernel.iter().enumerate() {
        for (w, &c) in prev.words.iter().zip(k) {
            if w.letters[0].is_unit() || c == C64::new(0.0, 0.0) {
                continue;
            }
            let dw = w.d();
            let i = index[&word_key(&dw)];
            m[(i, j)] += c * dw.coeff / words[i].coeff;
        }
    }
    m
}

fn budget_targets(triple: &Triple, budget: &Budget, degree: usize, lvl: &TowerLevel) -> Result<Vec<TensorOp>> {
    let Some(sb) = budget.outer() else {
        return Ok(Vec::new());
    };
    let f = triple.sign(lvl);
    let mut fk = TensorOp::identity(triple.factor_dims(lvl));
    for _ in 0..degree {
        fk = fk.mul(&f);
    }
    let cap = sb.laurent_cap as i32;
    (-cap..=cap)
        .map(|e| {
            let l = if e == 0 { Letter::Unit } else { Letter::Laurent(e) };
            Ok(fk.mul(&triple.realize(&l, lvl)?))
        })
        .collect()
}

fn degree_report(
    triple: &Triple,
    budget: &Budget,
    letters: &[Letter],
    n: usize,
    prev: Option<&KSpaceDegree>,
    schedule: &HeatSchedule,
    opts: &FgrOptions,
    id_scale: f64,
) -> Result<KSpaceDegree> {
    let pivots = prev.map(|p| seminorm_pivots(&p.gram, p.threshold));
    let (words, reduced) = degree_words(letters, n, prev.zip(pivots.as_deref()), opts)?;
    let nw = words.len();
    let ops = |lvl: &TowerLevel| -> Result<Vec<TensorOp>> {
        let mut ev = Evaluator::new(triple, lvl.clone())?;
        let mut xs = words.iter().map(|w| ev.word(w)).collect::<Result<Vec<_>>>()?;
        xs.extend(budget_targets(triple, budget, n, lvl)?);
        Ok(xs)
    };
    let hg = heat_gram(triple, &ops, schedule, opts.max_factor_dim)?;
    let ntot = hg.value.nrows();
    let targets = ntot - nw;
    let gw = hg.value.view((0, 0), (nw, nw)).into_owned();
    let ew = hermitian_eigen(&gw);
    let all = hermitian_eigen(&hg.value);
    let max_eigenvalue = all.values.last().copied().unwrap_or(0.0);
    let min_eigenvalue = all.values.first().copied().unwrap_or(0.0);
    let gram_error = hg.error_norm();
    if min_eigenvalue < -10.0 * gram_error - 1e-12 * max_eigenvalue.max(id_scale) {
        return Err(Error::FunctionalInconsistent(format!(
            "degree {n}: Gram eigenvalue {min_eigenvalue:.3e} below −10 × error {gram_error:.3e}"
        )));
    }
    let threshold = opts.k_tol * max_eigenvalue.max(id_scale);
    let kernel: Vec<Vec<C64>> = (0..nw)
        .filter(|&k| ew.values[k] <= threshold)
        .map(|k| ew.vectors.column(k).iter().copied().collect())
        .collect();
    let gram_rank = nw - kernel.len();
    let mut marginal = ew.values.iter().filter(|&&l| is_marginal(l, threshold)).count();

    let m = match prev {
        Some(p) if n > 0 => orthonormalize_columns(&pad_rows(&dk_columns(p, &words), ntot)),
        _ => CMatrix::zeros(ntot, 0),
    };
    let (dk_rank, mm) = rank_on(&hg.value, &m, threshold);
    marginal += mm;
    let omega_full = gram_rank - dk_rank.min(gram_rank);
    let omega = if targets == 0 {
        omega_full
    } else {
        let t = orthonormalize_columns(&hstack(&m, &unit_columns(ntot, nw..ntot)));
        let (rt, mt) = rank_on(&hg.value, &t, threshold);
        let (rall, ma) = rank_on(&hg.value, &CMatrix::identity(ntot, ntot), threshold);
        marginal += mt + ma;
        let in_targets = rt - dk_rank.min(rt);
        let joint = rall - dk_rank.min(rall);
        (omega_full + in_targets).saturating_sub(joint)
    };
    Ok(KSpaceDegree {
        degree: n,
        words,
        reduced,
        gram_rank,
        k_plus_dk: nw - omega_full,
        kernel,
        dk_rank,
        omega_full,
        targets,
        omega,
        marginal,
        min_eigenvalue,
        max_eigenvalue,
        threshold,
        gram_error,
        gram: gw,
    })
}

fn fgr_pass(triple: &Triple, max_degree: usize, budget: &Budget, schedule: &HeatSchedule, opts: &FgrOptions) -> Result<Vec<KSpaceDegree>> {
    let letters = triple.letters(budget)?;
    let id_scale = identity_scale(triple, schedule, opts.max_factor_dim)?;
    let mut degrees: Vec<KSpaceDegree> = Vec::with_capacity(max_degree + 1);
    for n in 0..=max_degree {
        let d = degree_report(triple, budget, &letters, n, degrees.last(), schedule, opts, id_scale)?;
        degrees.push(d);
    }
    Ok(degrees)
}

/// Per degree, `Ωⁿ/(Kⁿ + dK^{n−1})` with `Kⁿ` the null space of the
/// `∮`-seminorm Gram matrix over the budget words. A marginal eigenvalue
/// triggers one schedule refinement.
pub fn fgr_dga_dims(triple: &Triple, max_degree: usize, budget: &Budget, opts: &FgrOptions) -> Result<KSpaceReport> {
    let mut schedule = opts.schedule.clone();
    let mut degrees = fgr_pass(triple, max_degree, budget, &schedule, opts)?;
    let mut refined = false;
    if degrees.iter().any(|d| d.marginal > 0) {
        schedule = schedule.refine();
        degrees = fgr_pass(triple, max_degree, budget, &schedule, opts)?;
        refined = true;
    }
    Ok(KSpaceReport {
        triple: triple.name(),
        budget: budget.clone(),
        schedule,
        k_tol: opts.k_tol,
        refined,
        degrees,
    })
}

pub const VERDICT_FGR_CONSTANT: &str = "FGR constant across bases; Dirac distinguishes";
pub const VERDICT_NONE: &str = "no distinguishing power measurable";
pub const VERDICT_FGR_DISTINGUISHES: &str = "FGR distinguishes bases";

/// One base triple's reports.
#[derive(Clone, Copy, Debug)]
pub struct ComparisonInput<'a> {
    pub base: &'a str,
    pub dirac: &'a crate::forms::DiracDgaReport,
    pub fgr: &'a KSpaceReport,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComparisonRow {
    pub degree: usize,
    pub dirac: Vec<Option<usize>>,
    pub fgr: Vec<Option<usize>>,
    pub fgr_constant: bool,
    pub dirac_varies: bool,
    /// FGR constant while Dirac varies.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComparisonReport {
    pub bases: Vec<String>,
    pub rows: Vec<ComparisonRow>,
    pub verdict: String,
}

fn all_equal<T: PartialEq>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

/// Side-by-side dimensions across base triples at matched suspension budgets.
pub fn compare_dgas(inputs: &[ComparisonInput<'_>]) -> Result<ComparisonReport> {
    if inputs.is_empty() {
        return Err(Error::Invalid(String::from("nothing to compare")));
    }
    let outer: Vec<_> = inputs
        .iter()
        .flat_map(|i| [i.dirac.budget.outer(), i.fgr.budget.outer()])
        .collect();
    if outer.iter().any(Option::is_none) || !all_equal(&outer) {
        return Err(Error::BudgetMismatch(format!(
            "outer suspension budgets differ across the compared reports: {outer:?}"
        )));
    }
    let max_degree = inputs
        .iter()
        .flat_map(|i| i.dirac.degrees.iter().map(|d| d.degree).chain(i.fgr.degrees.iter().map(|d| d.degree)))
        .max()
        .unwrap_or(0);
    let mut rows = Vec::new();
    for degree in 0..=max_degree {
        let dirac: Vec<Option<usize>> = inputs.iter().map(|i| i.dirac.omega(degree)).collect();
        let fgr: Vec<Option<usize>> = inputs.iter().map(|i| i.fgr.omega(degree)).collect();
        let fgr_constant = fgr.iter().all(Option::is_some) && all_equal(&fgr);
        let dirac_varies = dirac.iter().all(Option::is_some) && !all_equal(&dirac);
        rows.push(ComparisonRow {
            degree,
            dirac,
            fgr,
            fgr_constant,
            dirac_varies,
            flagged: fgr_constant && dirac_varies,
        });
    }
    let fgr_differs = rows.iter().any(|r| r.fgr.iter().all(Option::is_some) && !r.fgr_constant);
    let verdict = if fgr_differs {
        VERDICT_FGR_DISTINGUISHES
    } else if rows.iter().any(|r| r.flagged) {
        VERDICT_FGR_CONSTANT
    } else {
        VERDICT_NONE
    };
    Ok(ComparisonReport {
        bases: inputs.iter().map(|i| i.base.to_string()).collect(),
        rows,
        verdict: verdict.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qds::suspend_triple;
    use crate::triple::make_circle_triple;

    fn sigma() -> Triple {
        let c: Triple = make_circle_triple(24, 1).unwrap().into();
        suspend_triple(c, 12, 3).unwrap().into()
    }

    fn quick() -> FgrOptions {
        FgrOptions::new(HeatSchedule::geometric(0.25, 2.0, 5, 3).unwrap())
    }

    #[test]
    fn atom_gram_matches_direct_inner_products() {
        let t = sigma();
        let lvl = TowerLevel { base: 10, inner: vec![8] };
        let words = enumerate_words_over(&t.letters(&Budget::suspended(1, 1, 2)).unwrap(), 1, 1000).unwrap();
        let mut ev = Evaluator::new(&t, lvl.clone()).unwrap();
        let xs: Vec<TensorOp> = words.iter().take(25).map(|w| ev.word(w).unwrap()).collect();
        let w = heat_weights(&t, &lvl, 0.3);
        let mut book = AtomBook::new(2);
        let ex: Vec<Expanded> = xs.iter().map(|x| book.expand(x)).collect();
        let sizes: Vec<usize> = book.atoms.iter().map(Vec::len).collect();
        let g = gram_from_tables(&ex, &book.tables(&w), &sizes);
        for u in 0..xs.len() {
            for v in 0..xs.len() {
                let d = xs[u].inner_weighted(&xs[v], &w);
                assert!((g[(u, v)] - d).norm() <= 1e-10 * (1.0 + d.norm()), "{u} {v}");
            }
        }
    }

    #[test]
    fn membership_of_finite_and_laurent_parts() {
        let t = sigma();
        let fin = FormExpr::letter(Letter::fin(Letter::Gen(0), 0, 0));
        assert!(k_membership(&t, &fin, &quick()).unwrap().member);
        let laurent = FormExpr::letter(Letter::Laurent(1));
        let v = k_membership(&t, &laurent, &quick()).unwrap();
        assert!(!v.member && !v.marginal);
        assert!((v.value.value.re - 2.0).abs() < 0.05, "{:?}", v.value.value);
    }

    #[test]
    fn comparison_verdicts() {
        use crate::forms::{DegreeReport, DiracDgaReport};
        let b = Budget::suspended(1, 1, 1);
        let dr = |o: usize| DiracDgaReport {
            triple: String::from("x"),
            budget: b.clone(),
            degrees: vec![DegreeReport {
                degree: 0,
                words: 0,
                junk_words: 0,
                kernel_dim: 0,
                per_level: Vec::new(),
                pi_omega: o,
                junk: 0,
                omega: o,
                stabilized: true,
                marginal: false,
                rerun_level: None,
            }],
        };
        let fr = KSpaceReport {
            triple: String::from("x"),
            budget: b.clone(),
            schedule: quick().schedule,
            k_tol: 1e-6,
            refined: false,
            degrees: Vec::new(),
        };
        let (d1, d2) = (dr(3), dr(4));
        let same = compare_dgas(&[
            ComparisonInput { base: "a", dirac: &d1, fgr: &fr },
            ComparisonInput { base: "a", dirac: &d1, fgr: &fr },
        ])
        .unwrap();
        assert_eq!(same.verdict, VERDICT_NONE);
        let mut fr2 = fr.clone();
        fr2.budget = Budget::suspended(1, 1, 2);
        assert!(compare_dgas(&[
            ComparisonInput { base: "a", dirac: &d1, fgr: &fr },
            ComparisonInput { base: "b", dirac: &d2, fgr: &fr2 },
        ])
        .is_err());
    }
}
