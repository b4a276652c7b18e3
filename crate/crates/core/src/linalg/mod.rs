//! Complex linear algebra on truncated operators: sparse matrices, spans of
//! operators and their numerical rank, quotients and relation spaces.

mod eigen;
mod sparse;
mod span;

pub use eigen::{hermitian_eigen, HermitianEigen};
pub use sparse::SparseMatrix;
pub use span::{
    combine_columns, dedup_proportional, dense_independent, dense_left_null, dense_rank, embed, independent_subset, left_null,
    nullspace_coeffs, orthonormalize_columns, quotient_dim, rank_of, span_rank, Embedding,
    OperatorSpan, RankReport, SparseVec, DEFAULT_RANK_TOL,
};

pub type C64 = num_complex::Complex<f64>;
pub type CMatrix = nalgebra::DMatrix<C64>;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub(crate) fn fnv(bytes: impl Iterator<Item = u64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for w in bytes {
        for b in w.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}
