//! Small dense linear algebra helpers shared by the tokenizer and metrics.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
///
/// Returns `(eigenvalues, eigenvectors)` where column `j` of the eigenvector
/// matrix corresponds to `eigenvalues[j]`. The caller is responsible for
/// symmetrizing the input; only the actual symmetric part is used.
pub fn sym_eigen(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "sym_eigen requires a square matrix");
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[[i, j]] + a[[j, i]]));
    let eig = m.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut values = Array1::zeros(n);
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        for r in 0..n {
            vectors[[r, dst]] = eig.eigenvectors[(r, src)];
        }
    }
    (values, vectors)
}

/// Squared Euclidean distance between two equal-length slices.
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eigen_of_diagonal_is_sorted_descending() {
        let a = array![[1.0, 0.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, 3.0]];
        let (vals, vecs) = sym_eigen(&a);
        assert!((vals[0] - 5.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        assert!((vals[2] - 1.0).abs() < 1e-12);
        // eigenvector for 5.0 is e1 up to sign
        assert!((vecs[[1, 0]].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, v) = sym_eigen(&a);
        let lambda = Array2::from_diag(&vals);
        let back = v.dot(&lambda).dot(&v.t());
        for i in 0..2 {
            for j in 0..2 {
                assert!((back[[i, j]] - a[[i, j]]).abs() < 1e-10);
            }
        }
    }
}
