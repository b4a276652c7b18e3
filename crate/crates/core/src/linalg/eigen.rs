use alloc::vec::Vec;

use super::CMatrix;

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn hermitian_eigen(h: &CMatrix) -> HermitianEigen {
    let n = h.nrows();
    if n == 0 {
        return HermitianEigen {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        };
    }
    let sym = (h + h.adjoint()) * super::re(0.5);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    HermitianEigen { values, vectors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    #[test]
    fn pauli_y_spectrum() {
        let h = CMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(0., -1.), c64(0., 1.), c64(0., 0.)]);
        let e = hermitian_eigen(&h);
        assert!((e.values[0] + 1.0).abs() < 1e-12);
        assert!((e.values[1] - 1.0).abs() < 1e-12);
        let v = e.vectors.column(1);
        let hv = &h * v;
        assert!((hv - v).norm() < 1e-12);
    }
}
