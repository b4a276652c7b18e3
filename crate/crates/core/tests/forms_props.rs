use std::sync::Arc;

use proptest::prelude::*;
use spectral_dga_core::forms::{
    algebra_products, base_cohomology, delta_apply, dirac_dga_dims, junk_space, DecomposedElement, DiracOptions,
    Evaluator, FormExpr, FormWord,
};
use spectral_dga_core::linalg::{orthonormalize_columns, rank_of, re, c64, CMatrix, SparseVec, C64};
use spectral_dga_core::qds::{
    suspend_triple, AlgebraElement, Budget, FinMatrix, LaurentPoly, Letter, SuspendedElement, Triple,
};
use spectral_dga_core::triple::{make_circle_triple, TruncationFamily};
use spectral_dga_core::Error;

fn circle() -> Triple {
    make_circle_triple(48, 2).unwrap().into()
}

fn sigma() -> Triple {
    let c: Triple = make_circle_triple(24, 1).unwrap().into();
    suspend_triple(c, 12, 3).unwrap().into()
}

fn word(max_degree: usize) -> impl Strategy<Value = FormExpr> {
    let letters = circle().letters(&Budget::leaf(2)).unwrap();
    let n = letters.len();
    (proptest::collection::vec(0..=n, 1..=max_degree + 1), -3i32..=3).prop_map(move |(idx, c)| {
        let pick = |i: usize| if i == n { Letter::Unit } else { letters[i].clone() };
        let w = FormWord::new(pick(idx[0]), idx[1..].iter().map(|&i| pick(i)).collect());
        FormExpr::word(w).scale(re(c as f64))
    })
}

fn form(max_degree: usize) -> impl Strategy<Value = FormExpr> {
    proptest::collection::vec(word(max_degree), 1..3).prop_map(|ws| {
        let deg = ws[0].degree;
        ws.into_iter()
            .filter(|w| w.degree == deg)
            .fold(FormExpr::zero(deg), |acc, w| acc.add(&w).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pi_is_multiplicative_on_interior_rows(a in form(2), b in form(2)) {
        let t = circle();
        let mut ev = Evaluator::new(&t, t.level(40)).unwrap();
        let lhs = ev.expr(&a.mul(&b)).unwrap().to_sparse();
        let rhs = ev.expr(&a).unwrap().mul(&ev.expr(&b).unwrap()).to_sparse();
        let mask = t.row_mask(ev.level(), &[2 * 6]);
        let (l, r) = (lhs.restrict_rows(|i| mask[i]), rhs.restrict_rows(|i| mask[i]));
        prop_assert_eq!(l.to_dense(), r.to_dense());
    }

    #[test]
    fn leibniz_and_d_squared_hold_formally(a in form(2), b in form(2)) {
        prop_assert!(a.d().d().normalize().is_zero());
        let sign = if a.degree % 2 == 0 { 1.0 } else { -1.0 };
        let lhs = a.mul(&b).d();
        let rhs = a.d().mul(&b).add(&a.mul(&b.d()).scale(re(sign))).unwrap();
        prop_assert!(lhs.add(&rhs.scale(re(-1.0))).unwrap().normalize().is_zero());
    }

    #[test]
    fn pi_rank_ignores_order_and_unitary_recombination(
        ws in proptest::collection::vec(word(1), 3..10),
        perm_seed in any::<u64>(),
        mix in proptest::collection::vec(-1.0f64..1.0, 16),
    ) {
        let t = circle();
        let ws: Vec<FormExpr> = ws.into_iter().filter(|w| w.degree == 1).collect();
        prop_assume!(ws.len() >= 2);
        let mut ev = Evaluator::new(&t, t.level(32)).unwrap();
        let mask = t.row_mask(ev.level(), &[8]);
        let vs: Vec<SparseVec> = ws
            .iter()
            .map(|w| SparseVec::from_matrix(&ev.expr(w).unwrap().to_sparse(), |r| mask[r]))
            .collect();
        let base = rank_of(&vs, 1e-9).rank;
        let mut shuffled = vs.clone();
        let k = shuffled.len();
        for i in 0..k {
            let j = ((perm_seed >> (i % 60)) as usize + i * 7) % k;
            shuffled.swap(i, j);
        }
        prop_assert_eq!(rank_of(&shuffled, 1e-9).rank, base);
        let a = CMatrix::from_fn(k, k, |i, j| c64(mix[(i * k + j) % 16] + if i == j { 2.0 } else { 0.0 }, mix[(i + 5 * j) % 16]));
        let u = orthonormalize_columns(&a);
        prop_assume!(u.ncols() == k);
        let mixed: Vec<SparseVec> = (0..k)
            .map(|c| {
                let refs: Vec<&SparseVec> = vs.iter().collect();
                let coeffs: Vec<C64> = (0..k).map(|r| u[(r, c)]).collect();
                SparseVec::combination(&refs, &coeffs)
            })
            .collect();
        prop_assert_eq!(rank_of(&mixed, 1e-9).rank, base);
    }
}

fn assert_junk_contained(t: &Triple, degree: usize, budget: &Budget, levels: Vec<usize>) {
    let opts = DiracOptions::new(levels);
    let junk = junk_space(t, degree, budget, &opts).unwrap();
    let letters = t.letters(budget).unwrap();
    let jl = if degree <= 1 {
        letters.clone()
    } else {
        algebra_products(t, &letters, junk.levels.last().unwrap()).unwrap()
    };
    let margins: Vec<usize> = t
        .margins_for(&letters, degree + 1)
        .iter()
        .zip(t.margins_for(&jl, degree))
        .map(|(a, b)| *a.max(&b))
        .collect();
    let words = spectral_dga_core::forms::enumerate_words_over(&jl, degree, 1 << 20).unwrap();
    for (lvl, members) in junk.levels.iter().zip(&junk.members) {
        let mask = t.row_mask(lvl, &margins);
        let mut ev = Evaluator::new(t, lvl.clone()).unwrap();
        let v = ev.vectors(&words, &mask).unwrap();
        let rv = rank_of(&v, 1e-9).rank;
        let mut both = v.clone();
        both.extend(members.iter().cloned());
        assert_eq!(rank_of(&both, 1e-9).rank, rv, "junk leaves pi(Omega^{degree}) at {lvl:?}");
    }
}

#[test]
fn junk_lies_inside_represented_forms() {
    assert_junk_contained(&circle(), 2, &Budget::leaf(1), vec![32, 40]);
    assert_junk_contained(&circle(), 3, &Budget::leaf(1), vec![40]);
    assert_junk_contained(&sigma(), 1, &Budget::suspended(1, 1, 2), vec![12, 16]);
}

fn decomposed() -> impl Strategy<Value = DecomposedElement> {
    (
        proptest::collection::vec((0u16..3, -2i32..=2, 0usize..3, 0usize..3), 1..4),
        proptest::collection::vec((-3i64..=3, -2i32..=2), 0..4),
    )
        .prop_map(|(fin, laurent)| {
            let mut x = SuspendedElement::default();
            for (g, c, i, j) in fin {
                let l = if g == 0 { Letter::Unit } else { Letter::Gen(g - 1) };
                let a = AlgebraElement { terms: vec![(re(c as f64), l)] };
                x = x.add(&SuspendedElement::elementary(a, FinMatrix::unit(i, j)));
            }
            let mut f = LaurentPoly::zero();
            for (e, c) in laurent {
                if e != 0 {
                    f.add_term(e, re(c as f64));
                }
            }
            DecomposedElement::algebra(x.add(&SuspendedElement::laurent(f)))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn suspended_differential_squares_to_zero(x in decomposed()) {
        let t = sigma();
        let dx = delta_apply(&t, &x).unwrap();
        let ddx = delta_apply(&t, &dx).unwrap();
        prop_assert!(ddx.is_zero());
    }
}

#[test]
fn brute_force_one_forms_match_the_decomposition() {
    let t = sigma();
    let base = t.suspension().unwrap().base.clone();
    let opts = DiracOptions::new(vec![12, 16, 20]);
    let inner = Budget::leaf(1);
    let base_omega1 = dirac_dga_dims(&base, 1, &inner, &opts).unwrap().omega(1).unwrap();
    let dim_a = base_cohomology(&base, &inner, &opts).unwrap().dim_algebra;
    for (c, l) in [(3, 1), (3, 2), (3, 3)] {
        let r = dirac_dga_dims(&t, 1, &Budget::suspended(1, c, l), &opts).unwrap();
        assert_eq!(r.omega(1).unwrap(), (base_omega1 + dim_a) * c * c + 2 * l + 1, "c = {c}, L = {l}");
    }
}

#[test]
fn dirac_stabilization_paths() {
    let t: Triple = make_circle_triple(24, 1).unwrap().into();
    let b = Budget::leaf(1);
    let ok = dirac_dga_dims(&t, 1, &b, &DiracOptions::new(vec![24, 32, 48])).unwrap();
    assert!(ok.degrees.iter().all(|d| d.stabilized && !d.marginal && d.rerun_level.is_none()));
    let short = dirac_dga_dims(&t, 1, &b, &DiracOptions::new(vec![24, 32])).unwrap();
    assert!(short.degrees.iter().all(|d| !d.stabilized && !d.marginal));
    assert_eq!(short.omega(1), ok.omega(1));
    let mut loose = DiracOptions::new(vec![24, 32, 48]);
    loose.tol = 0.5;
    let m = dirac_dga_dims(&t, 0, &b, &loose).unwrap();
    let d0 = &m.degrees[0];
    assert!(d0.marginal && !d0.stabilized);
    assert_eq!(d0.rerun_level, Some(64));
}

fn drifting() -> Triple {
    let mut m = make_circle_triple(24, 1).unwrap();
    let z = m.generators[m.generator_index("z^1").unwrap()].clone();
    m.generators.push(TruncationFamily {
        symbol: String::from("w"),
        rule: Arc::new(move |n| {
            let a = z.at(n);
            if n >= 40 { a } else { a.mul(&a) }
        }),
        bandwidth: 2,
        degree: 1,
        adjoint: None,
    });
    m.into()
}

#[test]
fn level_dependent_relations_are_caught() {
    let t = drifting();
    let b = Budget::leaf(1);
    let opts = DiracOptions::new(vec![24, 32, 48]);
    let r = dirac_dga_dims(&t, 0, &b, &opts).unwrap();
    let d0 = &r.degrees[0];
    assert!(!d0.marginal && !d0.stabilized);
    let dims: Vec<usize> = d0.per_level.iter().map(|l| l.omega).collect();
    assert!(dims.windows(2).any(|w| w[0] != w[1]), "{dims:?}");
    match dirac_dga_dims(&t, 1, &b, &opts) {
        Err(Error::JunkKernelUnstable(_)) => {}
        other => panic!("expected an unstable junk kernel, got {other:?}"),
    }
}
