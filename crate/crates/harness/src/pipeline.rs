use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use spectral_dga_core::fgr::{
    bind_level, compare_dgas, cross_term_vanishing, fgr_dga_dims, heat_oint, ComparisonInput, KSpaceReport,
};
use spectral_dga_core::forms::{
    base_cohomology, cohomology_dims, delta_apply, dirac_dga_dims, realize_decomposed, DecomposedElement,
    DiracDgaReport, FormExpr, FormWord,
};
use spectral_dga_core::qds::{AlgebraElement, FinMatrix, LaurentPoly, Letter, SuspendedElement, TensorOp, Triple};
use spectral_dga_core::triple::summability_estimate;
use spectral_dga_core::C64;

use crate::error::{HarnessError, Result};
use crate::record::*;
use crate::scenario::Scenario;

pub const DEFAULT_MAX_DIM: usize = 4096;
pub const THREADS_ENV: &str = "SPECTRAL_DGA_THREADS";

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub max_dim: usize,
    pub levels_override: Option<Vec<usize>>,
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            max_dim: DEFAULT_MAX_DIM,
            levels_override: None,
            seed: 0,
        }
    }
}

/// Result of one scenario run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub record: RunRecord,
    pub timings: Timings,
}

struct Artifacts {
    dirac: Option<DiracDgaReport>,
    fgr: Option<KSpaceReport>,
}

struct Clock {
    timings: Timings,
}

impl Clock {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f();
        self.timings.stages.push((name.to_string(), t.elapsed().as_secs_f64()));
        out
    }
}

fn apply_overrides(scenario: &Scenario, opts: &RunOptions) -> Scenario {
    let mut s = scenario.clone();
    if let Some(l) = &opts.levels_override {
        s.levels = l.clone();
    }
    s
}

/// Validates without computing; returns the assembled triple's name.
pub fn validate_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<String> {
    let s = apply_overrides(scenario, opts);
    Ok(s.validate(opts.max_dim)?.name())
}

pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput> {
    let (out, _) = execute(scenario, opts)?;
    Ok(out)
}

fn execute(scenario: &Scenario, opts: &RunOptions) -> Result<(RunOutput, Artifacts)> {
    let scn = apply_overrides(scenario, opts);
    let triple = scn.validate(opts.max_dim)?;
    let hash = scn.hash()?;
    let mut rec = RunRecord::new(&scn.name, &hash, &triple.name(), opts.seed);
    let mut clock = Clock {
        timings: Timings {
            scenario: scn.name.clone(),
            stages: Vec::new(),
        },
    };
    let mut art = Artifacts { dirac: None, fgr: None };
    let budget = scn.word_budget();
    let dopts = scn.dirac_options();

    if scn.stages.dirac || scn.stages.theorem {
        let deg = if scn.stages.dirac { scn.budget.max_degree } else { 1 };
        let r = clock.stage("dirac", || {
            dirac_dga_dims(&triple, deg, &budget, &dopts).map_err(|e| HarnessError::computation("forms", "dirac_dga_dims", e))
        })?;
        let sec = DiracSection::from(&r);
        if let Some(exp) = &scn.expect.dirac {
            let got = sec.omegas();
            rec.check("dirac.dims", &got == exp, format!("expected {exp:?}, got {got:?}"));
        }
        if scn.expect.stabilized {
            let bad: Vec<usize> = sec.degrees.iter().filter(|d| !d.stabilized).map(|d| d.degree).collect();
            rec.check("dirac.stabilized", bad.is_empty(), format!("unstabilized degrees {bad:?}"));
        }
        rec.dirac = Some(sec);
        art.dirac = Some(r);
    }

    if scn.stages.theorem {
        let s = triple.suspension().expect("validated");
        let sb = budget.outer().expect("validated");
        let inner = budget.inner();
        let (base_omega1, base_algebra) = clock.stage("theorem", || {
            let br = dirac_dga_dims(&s.base, 1, &inner, &dopts)
                .map_err(|e| HarnessError::computation("forms", "base dirac_dga_dims", e))?;
            let bc = base_cohomology(&s.base, &inner, &dopts)
                .map_err(|e| HarnessError::computation("forms", "base_cohomology", e))?;
            Ok((br.omega(1).unwrap_or(0), bc.dim_algebra))
        })?;
        let c2 = sb.index_cap * sb.index_cap;
        let predicted = base_omega1 * c2 + base_algebra * c2 + 2 * sb.laurent_cap + 1;
        let realized = art.dirac.as_ref().and_then(|r| r.omega(1)).unwrap_or(0);
        rec.check(
            "theorem.degree1",
            predicted == realized,
            format!("{base_omega1}·{c2} + {base_algebra}·{c2} + {} = {predicted}, realized {realized}", 2 * sb.laurent_cap + 1),
        );
        rec.theorem = Some(TheoremSection {
            base_omega1,
            base_algebra,
            index_cap: sb.index_cap,
            laurent_cap: sb.laurent_cap,
            predicted,
            realized,
        });
    }

    if scn.stages.differentials {
        let sec = clock.stage("differentials", || differentials(&scn, &triple, opts.seed))?;
        rec.check(
            "differentials",
            sec.failures == 0,
            format!(
                "{} samples, max residuals {} and {}",
                sec.samples, sec.max_formula_residual, sec.max_square_residual
            ),
        );
        rec.differentials = Some(sec);
    }

    if scn.stages.cohomology {
        let sec = clock.stage("cohomology", || {
            if triple.suspension().is_some() {
                cohomology_dims(&triple, &budget, &dopts)
                    .map(|r| CohomologySection::from(&r))
                    .map_err(|e| HarnessError::computation("forms", "cohomology_dims", e))
            } else {
                base_cohomology(&triple, &budget, &dopts)
                    .map(|b| CohomologySection {
                        base: (&b).into(),
                        rows: Vec::new(),
                    })
                    .map_err(|e| HarnessError::computation("forms", "base_cohomology", e))
            }
        })?;
        for r in &sec.rows {
            rec.check(
                &format!("cohomology.h{}", r.degree),
                r.realized == r.predicted,
                format!("realized {}, predicted {}", r.realized, r.predicted),
            );
        }
        if let Some(h0) = scn.expect.h0 {
            let got = sec.rows.iter().find(|r| r.degree == 0).map_or(sec.base.h0, |r| r.realized);
            rec.check("cohomology.expected_h0", got == h0, format!("expected {h0}, got {got}"));
        }
        rec.cohomology = Some(sec);
    }

    if scn.stages.fgr {
        let fo = scn.fgr_options()?;
        let r = clock.stage("fgr", || {
            fgr_dga_dims(&triple, scn.fgr_max_degree(), &budget, &fo)
                .map_err(|e| HarnessError::computation("fgr", "fgr_dga_dims", e))
        })?;
        let mut sec = FgrSection::from(&r);
        sec.k0 = k0_record(&r);
        if let Some(exp) = &scn.expect.fgr {
            let got = sec.omegas();
            rec.check("fgr.dims", &got == exp, format!("expected {exp:?}, got {got:?}"));
        }
        rec.check("fgr.marginal", sec.marginal == 0, format!("{} marginal eigenvalue(s)", sec.marginal));
        if let Some(k0) = &sec.k0 {
            rec.check(
                "fgr.k0_contains_finite",
                k0.contains_finite,
                format!("max seminorm {} vs threshold {}", k0.finite_max_seminorm, k0.threshold),
            );
            rec.check(
                "fgr.k0_excludes_laurent",
                k0.excludes_laurent,
                format!("min eigenvalue {} vs threshold {}", k0.laurent_min_eigenvalue, k0.threshold),
            );
        }
        rec.fgr = Some(sec);
        art.fgr = Some(r);
    }

    if scn.stages.cross_terms {
        let mut fo = scn.fgr_options()?;
        fo.k_tol = scn.tolerances.cross_term;
        let samples = cross_term_samples(&triple, &scn, opts.seed)?;
        let r = clock.stage("cross_terms", || {
            cross_term_vanishing(&triple, &samples, &fo)
                .map_err(|e| HarnessError::computation("fgr", "cross_term_vanishing", e))
        })?;
        let fails = r.failures();
        rec.check(
            "cross_terms",
            r.passed(),
            if fails.is_empty() {
                format!("{} samples below {}", r.rows.len(), fmt_f64(r.threshold))
            } else {
                fails.join("; ")
            },
        );
        rec.cross_terms = Some(CrossTermSection {
            threshold: fmt_f64(r.threshold),
            rows: r
                .rows
                .iter()
                .map(|x| CrossTermRecord {
                    sample: format!("omega{}", x.sample),
                    value: (&x.value).into(),
                    pass: x.pass,
                })
                .collect(),
        });
    }

    if scn.stages.summability {
        let ts = scn.heat.summability_t.clone();
        let tmin = ts.iter().copied().fold(f64::INFINITY, f64::min);
        let (lvl, est) = clock.stage("summability", || {
            let lvl = bind_level(&triple, tmin, 1, scn.heat.max_factor_dim)
                .map_err(|e| HarnessError::computation("triple", "bind_level", e))?;
            let est = summability_estimate(&triple, &ts, &lvl)
                .map_err(|e| HarnessError::computation("triple", "summability_estimate", e))?;
            Ok((lvl, est))
        })?;
        let expected = scn.expect.summability.unwrap_or_else(|| triple.p());
        let dev = (est.p - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
        rec.check(
            "summability",
            dev <= scn.tolerances.summability,
            format!("p = {}, expected {expected}", fmt_f64(est.p)),
        );
        rec.summability = Some(SummabilitySection {
            level: triple.factor_dims(&lvl),
            p: fmt_f64(est.p),
            intercept: fmt_f64(est.intercept),
            residual: fmt_f64(est.residual),
            points: est.points.iter().map(|&(t, v)| (fmt_f64(t), fmt_f64(v))).collect(),
        });
    }

    if scn.stages.heat_identity {
        let sched = scn.schedule()?;
        let h = clock.stage("heat_identity", || {
            let id = |l: &_| Ok(TensorOp::identity(triple.factor_dims(l)));
            heat_oint(&triple, &id, &sched, scn.heat.max_factor_dim)
                .map_err(|e| HarnessError::computation("fgr", "heat_oint", e))
        })?;
        if let Some(e) = scn.expect.heat_identity {
            let dev = (h.value - C64::new(e, 0.0)).norm() / e.abs().max(f64::MIN_POSITIVE);
            rec.check(
                "heat_identity",
                dev <= scn.tolerances.heat_identity,
                format!("limit {} ± {}, expected {e}", fmt_c64(h.value), fmt_f64(h.error_estimate)),
            );
        }
        rec.heat_identity = Some(HeatIdentitySection {
            limit: (&h).into(),
            t_values: sched.t_values.iter().map(|&t| fmt_f64(t)).collect(),
        });
    }

    Ok((
        RunOutput {
            record: rec,
            timings: clock.timings,
        },
        art,
    ))
}

fn k0_record(r: &KSpaceReport) -> Option<K0Record> {
    let d0 = r.degrees.iter().find(|d| d.degree == 0)?;
    let n = d0.words.len();
    let mut finite = Vec::new();
    let mut laurent = Vec::new();
    for (i, w) in d0.words.iter().enumerate() {
        if w.letters[0].is_finite_part() {
            finite.push(i);
        } else if w.letters[0].laurent_exponent().is_some() {
            laurent.push(i);
        }
    }
    let max_semi = finite
        .iter()
        .map(|&i| {
            let mut c = vec![C64::new(0.0, 0.0); n];
            c[i] = C64::new(1.0, 0.0);
            d0.seminorm(&c)
        })
        .fold(0.0, f64::max);
    let min_eig = d0.restricted_min_eigenvalue(&laurent);
    Some(K0Record {
        finite_words: finite.len(),
        finite_max_seminorm: fmt_f64(max_semi),
        laurent_words: laurent.len(),
        laurent_min_eigenvalue: fmt_f64(min_eig),
        threshold: fmt_f64(d0.threshold),
        contains_finite: max_semi <= d0.threshold,
        excludes_laurent: min_eig > d0.threshold,
    })
}

fn rand_c64(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Random one-forms over finite-part letters of the outer suspension.
fn cross_term_samples(triple: &Triple, scn: &Scenario, seed: u64) -> Result<Vec<FormExpr>> {
    let letters: Vec<Letter> = triple
        .letters(&scn.word_budget())
        .map_err(|e| HarnessError::computation("forms", "letters", e))?
        .into_iter()
        .filter(Letter::is_finite_part)
        .collect();
    if letters.is_empty() {
        return Err(HarnessError::Validation("no finite-part letters in the budget".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(scn.stages.cross_term_samples);
    for _ in 0..scn.stages.cross_term_samples {
        let mut omega = FormExpr::zero(1);
        for _ in 0..3 {
            let a0 = letters[rng.random_range(0..letters.len())].clone();
            let a1 = letters[rng.random_range(0..letters.len())].clone();
            let w = FormExpr::word(FormWord::new(a0, vec![a1])).scale(rand_c64(&mut rng));
            omega = omega
                .add(&w)
                .map_err(|e| HarnessError::computation("forms", "sample", e))?;
        }
        out.push(omega);
    }
    Ok(out)
}

fn random_decomposed(triple: &Triple, scn: &Scenario, rng: &mut ChaCha8Rng) -> Result<DecomposedElement> {
    let s = triple.suspension().expect("validated");
    let budget = scn.word_budget();
    let sb = budget.outer().expect("validated");
    let mut base = vec![Letter::Unit];
    base.extend(
        s.base
            .letters(&budget.inner())
            .map_err(|e| HarnessError::computation("qds", "letters", e))?,
    );
    let c = sb.index_cap.max(1);
    let mut x = SuspendedElement::default();
    for _ in 0..2 {
        let mut a = AlgebraElement { terms: Vec::new() };
        for _ in 0..2 {
            a.terms.push((rand_c64(rng), base[rng.random_range(0..base.len())].clone()));
        }
        let mut t = FinMatrix::default();
        for _ in 0..2 {
            t.add_entry(rng.random_range(0..c), rng.random_range(0..c), rand_c64(rng));
        }
        x = x.add(&SuspendedElement::elementary(a, t));
    }
    let mut f = LaurentPoly::zero();
    let lc = sb.laurent_cap as i64;
    for e in -lc..=lc {
        if e != 0 && rng.random_bool(0.5) {
            f.add_term(e, rand_c64(rng));
        }
    }
    Ok(DecomposedElement::algebra(x.add(&SuspendedElement::laurent(f))))
}

/// `δ⁰` against the commutator with the suspended Dirac operator on window
/// rows, and `δ¹δ⁰ = 0`, on random decomposed elements.
fn differentials(scn: &Scenario, triple: &Triple, seed: u64) -> Result<DifferentialSection> {
    let comp = |stage: &'static str| move |e| HarnessError::computation("forms", stage, e);
    let lvl = triple.level(*scn.levels.last().expect("validated"));
    let letters = triple.letters(&scn.word_budget()).map_err(comp("letters"))?;
    let margins = triple.margins_for(&letters, 2);
    triple
        .check_window(&lvl, &margins, &scn.word_budget())
        .map_err(comp("window"))?;
    let mask = triple.row_mask(&lvl, &margins);
    let d = triple.dirac(&lvl);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_formula, mut worst_square, mut failures) = (0.0f64, 0.0f64, 0);
    let tol = scn.tolerances.differential;
    for _ in 0..scn.stages.differential_samples {
        let x = random_decomposed(triple, scn, &mut rng)?;
        let dx = delta_apply(triple, &x).map_err(comp("delta_apply"))?;
        let lhs = realize_decomposed(triple, &dx, &lvl).map_err(comp("realize"))?.to_sparse();
        let op = realize_decomposed(triple, &x, &lvl).map_err(comp("realize"))?;
        let rhs = d.commutator(&op).to_sparse();
        let (l, r) = (lhs.restrict_rows(|i| mask[i]), rhs.restrict_rows(|i| mask[i]));
        let formula = l.sub(&r).frobenius_norm() / r.frobenius_norm().max(f64::MIN_POSITIVE);
        let ddx = delta_apply(triple, &dx).map_err(comp("delta_apply"))?;
        let dd = realize_decomposed(triple, &ddx, &lvl).map_err(comp("realize"))?.to_sparse();
        let square = dd.frobenius_norm() / r.frobenius_norm().max(f64::MIN_POSITIVE);
        if !(formula <= tol && square <= tol) {
            failures += 1;
        }
        worst_formula = worst_formula.max(formula);
        worst_square = worst_square.max(square);
    }
    Ok(DifferentialSection {
        samples: scn.stages.differential_samples,
        max_formula_residual: fmt_f64(worst_formula),
        max_square_residual: fmt_f64(worst_square),
        failures,
    })
}

/// Worker count from `SPECTRAL_DGA_THREADS`, defaulting to the available
/// parallelism.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every scenario (Dirac and FGR stages forced on) and compares the
/// resulting dimension rows.
pub fn run_comparison(scenarios: &[Scenario], opts: &RunOptions) -> Result<RunOutput> {
    if scenarios.len() < 2 {
        return Err(HarnessError::Validation("comparison needs at least two scenarios".into()));
    }
    let forced: Vec<Scenario> = scenarios
        .iter()
        .map(|s| {
            let mut s = apply_overrides(s, opts);
            s.stages.dirac = true;
            s.stages.fgr = true;
            s
        })
        .collect();
    let outer: Vec<_> = forced.iter().map(|s| s.word_budget().outer()).collect();
    if outer.iter().any(Option::is_none) {
        return Err(HarnessError::Validation("every compared scenario needs a suspension".into()));
    }
    if outer.windows(2).any(|w| w[0] != w[1]) {
        return Err(HarnessError::Validation(format!(
            "incompatible budgets: outer suspension budgets {outer:?}"
        )));
    }
    if forced.windows(2).any(|w| w[0].fgr_max_degree() != w[1].fgr_max_degree() || w[0].budget.max_degree != w[1].budget.max_degree) {
        return Err(HarnessError::Validation("incompatible budgets: compared degrees differ".into()));
    }
    for s in &forced {
        s.validate(opts.max_dim)?;
    }
    let member_opts = RunOptions {
        levels_override: None,
        ..opts.clone()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| HarnessError::Report(e.to_string()))?;
    let results: Vec<Result<(RunOutput, Artifacts)>> =
        pool.install(|| forced.par_iter().map(|s| execute(s, &member_opts)).collect());
    let mut members = Vec::with_capacity(results.len());
    for r in results {
        members.push(r?);
    }
    let start = Instant::now();
    let inputs: Vec<ComparisonInput<'_>> = members
        .iter()
        .map(|(o, a)| ComparisonInput {
            base: &o.record.scenario,
            dirac: a.dirac.as_ref().expect("dirac forced"),
            fgr: a.fgr.as_ref().expect("fgr forced"),
        })
        .collect();
    let report = compare_dgas(&inputs).map_err(|e| match e {
        spectral_dga_core::Error::BudgetMismatch(m) => HarnessError::Validation(m),
        e => HarnessError::computation("fgr", "compare_dgas", e),
    })?;
    let names: Vec<&str> = members.iter().map(|(o, _)| o.record.scenario.as_str()).collect();
    let hashes: String = members.iter().map(|(o, _)| o.record.scenario_hash.as_str()).collect::<Vec<_>>().join(":");
    let mut rec = RunRecord::new(
        &format!("compare({})", names.join(", ")),
        &hashes,
        &members.iter().map(|(o, _)| o.record.triple.as_str()).collect::<Vec<_>>().join(", "),
        opts.seed,
    );
    let sec = ComparisonSection::from(&report);
    rec.comparison = Some(sec);
    let mut timings = Timings {
        scenario: rec.scenario.clone(),
        stages: Vec::new(),
    };
    for (o, _) in members {
        for (st, secs) in &o.timings.stages {
            timings.stages.push((format!("{}/{st}", o.timings.scenario), *secs));
        }
        rec.runs.push(o.record);
    }
    timings.stages.push(("compare".to_string(), start.elapsed().as_secs_f64()));
    Ok(RunOutput { record: rec, timings })
}
