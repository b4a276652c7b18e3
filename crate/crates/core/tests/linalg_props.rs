use proptest::prelude::*;
use spectral_dga_core::linalg::{
    c64, nullspace_coeffs, orthonormalize_columns, quotient_dim, span_rank, CMatrix, OperatorSpan, C64,
};

const TOL: f64 = 1e-9;
const N: usize = 4;

fn small_matrix() -> impl Strategy<Value = CMatrix> {
    proptest::collection::vec((-2i32..=2, -1i32..=1, any::<bool>()), N * N).prop_map(|v| {
        CMatrix::from_iterator(
            N,
            N,
            v.into_iter()
                .map(|(a, b, keep)| if keep { c64(a as f64, b as f64) } else { c64(0.0, 0.0) }),
        )
    })
}

fn family(max: usize) -> impl Strategy<Value = Vec<CMatrix>> {
    proptest::collection::vec(small_matrix(), 1..=max)
}

fn span(ms: &[CMatrix]) -> OperatorSpan {
    OperatorSpan::from_dense(0, TOL, ms).unwrap()
}

fn rank(ms: &[CMatrix]) -> usize {
    span_rank(&span(ms)).unwrap().rank
}

fn unitary(k: usize, seed: &[f64]) -> CMatrix {
    let a = CMatrix::from_fn(k, k, |i, j| c64(seed[(i * k + j) % seed.len()] + (i == j) as u8 as f64, seed[(3 * i + j + 1) % seed.len()]));
    orthonormalize_columns(&a)
}

fn mix(ms: &[CMatrix], u: &CMatrix) -> Vec<CMatrix> {
    (0..ms.len())
        .map(|i| {
            let mut acc = CMatrix::zeros(N, N);
            for (j, m) in ms.iter().enumerate() {
                acc += m * u[(j, i)];
            }
            acc
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_never_decreases_when_adding_a_member(ms in family(6), extra in small_matrix()) {
        let before = rank(&ms);
        let mut more = ms.clone();
        more.push(extra);
        prop_assert!(rank(&more) >= before);
    }

    #[test]
    fn rank_is_invariant_under_unitary_mixing(ms in family(5), seed in proptest::collection::vec(-1.0f64..1.0, 8)) {
        let u = unitary(ms.len(), &seed);
        prop_assume!(u.ncols() == ms.len());
        prop_assert_eq!(rank(&mix(&ms, &u)), rank(&ms));
    }

    #[test]
    fn quotient_plus_small_rank_is_big_rank(ms in family(6), picks in proptest::collection::vec((0usize..6, -2i32..=2), 1..4)) {
        let small: Vec<CMatrix> = picks
            .iter()
            .map(|&(i, c)| &ms[i % ms.len()] * C64::new(c as f64, 0.0) + &ms[(i + 1) % ms.len()])
            .collect();
        let q = quotient_dim(&span(&ms), &span(&small)).unwrap();
        prop_assert_eq!(q + rank(&small), rank(&ms));
    }

    #[test]
    fn null_coefficients_annihilate_the_span(ms in family(7)) {
        let mut all = ms.clone();
        all.push(&ms[0] * c64(2.0, -1.0));
        let coeffs = nullspace_coeffs(&span(&all)).unwrap();
        prop_assert!(!coeffs.is_empty());
        let largest = all.iter().map(|m| m.norm()).fold(0.0, f64::max);
        for c in &coeffs {
            let mut acc = CMatrix::zeros(N, N);
            for (m, x) in all.iter().zip(c) {
                acc += m * *x;
            }
            prop_assert!(acc.norm() <= TOL * largest, "residual {}", acc.norm());
        }
    }
}
