use proptest::prelude::*;
use spectral_dga_core::fgr::{bind_level, heat_weights};
use spectral_dga_core::linalg::{c64, re, SparseMatrix, C64};
use spectral_dga_core::qds::{
    rho_symbol, suspend_triple, AlgebraElement, FinMatrix, LaurentPoly, Letter, SuspendedElement, TensorOp, Triple,
};
use spectral_dga_core::triple::{
    make_adversarial_triple, make_circle_triple, make_two_point_triple, summability_estimate, SpectralTripleModel,
};

fn builtins() -> Vec<SpectralTripleModel> {
    vec![
        make_circle_triple(24, 3).unwrap(),
        make_two_point_triple(),
        make_adversarial_triple(),
    ]
}

fn sigma(cutoff: usize) -> Triple {
    let c: Triple = make_circle_triple(24, 2).unwrap().into();
    suspend_triple(c, cutoff, 3).unwrap().into()
}

fn dense_eq(a: &SparseMatrix, b: &SparseMatrix) -> bool {
    a.shape() == b.shape() && a.to_dense() == b.to_dense()
}

#[test]
fn sign_squares_to_identity_and_commutes_with_abs_dirac() {
    for m in builtins() {
        for level in [4, 9, 16] {
            let f = m.sign(level);
            let n = m.dim(level);
            assert!(dense_eq(&f.mul(&f), &SparseMatrix::identity(n)), "{} at {level}", m.name);
            let abs = SparseMatrix::diagonal_real(&m.abs_eigenvalues(level));
            assert!(f.commutator(&abs).is_zero() || f.commutator(&abs).max_abs() == 0.0);
        }
    }
    let t = sigma(8);
    let lvl = t.level(10);
    let f = t.sign(&lvl).to_sparse();
    assert!(dense_eq(&f.mul(&f), &SparseMatrix::identity(t.dim(&lvl))));
}

#[test]
fn builtin_families_are_interior_coherent() {
    for m in builtins() {
        for (lo, hi) in [(6, 7), (8, 12), (10, 30)] {
            m.check_coherence(lo, hi).unwrap_or_else(|e| panic!("{}: {e}", m.name));
        }
    }
}

#[test]
fn circle_summability_is_one() {
    let c: Triple = make_circle_triple(24, 1).unwrap().into();
    let ts = [0.02, 0.01, 0.005, 0.0025];
    let lvl = bind_level(&c, 0.0025, 1, 1 << 15).unwrap();
    let est = summability_estimate(&c, &ts, &lvl).unwrap();
    assert!((est.p - 1.0).abs() < 0.05, "{}", est.p);
}

#[test]
fn suspended_dirac_is_diagonal_with_shifted_entries() {
    let c = make_circle_triple(24, 2).unwrap();
    let t = sigma(7);
    for base in [5, 8] {
        let lvl = t.level(base);
        let d = t.dirac(&lvl).to_sparse();
        let lam = c.eigenvalues(base);
        let k = 7;
        for (i, &l) in lam.iter().enumerate() {
            let s = if l >= 0.0 { 1.0 } else { -1.0 };
            for m in 0..k {
                let r = i * k + m;
                assert_eq!(d.get(r, r), re(l + s * m as f64));
            }
        }
        assert_eq!(d.nnz(), lam.iter().enumerate().filter(|(_, &l)| l != 0.0).count() * k + (k - 1));
        let abs = t.eigenvalues(&lvl);
        for (i, &l) in lam.iter().enumerate() {
            for m in 0..k {
                assert_eq!(abs[i * k + m].abs(), l.abs() + m as f64);
            }
        }
    }
}

fn laurent() -> impl Strategy<Value = LaurentPoly> {
    proptest::collection::vec((-3i64..=3, -3i32..=3), 0..4).prop_map(|v| {
        let mut f = LaurentPoly::zero();
        for (e, c) in v {
            f.add_term(e, re(c as f64));
        }
        f
    })
}

fn fin() -> impl Strategy<Value = FinMatrix> {
    proptest::collection::vec((0usize..3, 0usize..3, -2i32..=2), 1..4).prop_map(|v| {
        let mut t = FinMatrix::default();
        for (i, j, c) in v {
            t.add_entry(i, j, re(c as f64));
        }
        t
    })
}

fn element() -> impl Strategy<Value = SuspendedElement> {
    (laurent(), fin(), 1u16..5, -2i32..=2).prop_map(|(f, t, g, c)| {
        let a = AlgebraElement {
            terms: vec![(re(c as f64), Letter::Gen(g - 1))],
        };
        SuspendedElement::elementary(a, t).add(&SuspendedElement::laurent(f))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symbol_kills_finite_part_and_is_multiplicative(x in element(), y in element()) {
        let finite_only = SuspendedElement { finite_part: x.finite_part.clone(), laurent_part: LaurentPoly::zero() };
        prop_assert!(rho_symbol(&finite_only).is_zero());
        prop_assert_eq!(rho_symbol(&x.mul(&y)), rho_symbol(&x).mul(&rho_symbol(&y)));
    }

    #[test]
    fn sigma_prime_is_a_right_inverse_of_the_symbol(f in laurent()) {
        prop_assert_eq!(rho_symbol(&SuspendedElement::laurent(f.clone())), f);
    }

    #[test]
    fn heat_trace_factorizes_on_elementary_tensors(
        entries in proptest::collection::vec((0usize..9, 0usize..9, -3i32..=3, -3i32..=3), 1..12),
        t in 0.05f64..1.0,
        base in 4usize..8,
    ) {
        let tr = sigma(9);
        let lvl = tr.level(base);
        let dims = tr.factor_dims(&lvl);
        let mut t1 = Vec::new();
        let mut t2 = Vec::new();
        for &(i, j, a, b) in &entries {
            t1.push((i % dims[0], j % dims[0], c64(a as f64, b as f64)));
            t2.push((j % dims[1], i % dims[1], c64(b as f64, -a as f64)));
        }
        let m1 = SparseMatrix::from_triplets(dims[0], dims[0], t1);
        let m2 = SparseMatrix::from_triplets(dims[1], dims[1], t2);
        let w = heat_weights(&tr, &lvl, t);
        let factored = m1.trace_weighted(&w[0]) * m2.trace_weighted(&w[1]);
        let op = TensorOp::elementary(C64::new(1.0, 0.0), vec![m1.clone(), m2.clone()]);
        let per_factor = op.trace_weighted(&w);
        let abs: Vec<f64> = tr.eigenvalues(&lvl).iter().map(|x| (-t * x.abs()).exp()).collect();
        let dense = m1.kron(&m2).trace_weighted(&abs);
        let scale = f64::EPSILON * tr.dim(&lvl) as f64 * (1.0 + factored.norm());
        prop_assert!((factored - dense).norm() <= scale, "{factored} vs {dense}");
        prop_assert!((per_factor - dense).norm() <= scale, "{per_factor} vs {dense}");
    }
}
