//! Dense linear-algebra helpers shared by the supply, kernel and RKHS code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{shape, Error, Result};

/// Symmetric eigendecomposition with eigenvalues sorted in descending order and
/// each eigenvector oriented so its first nonzero entry is positive.
pub fn sorted_symmetric_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(i).clone_owned();
        let scale = col.amax().max(f64::MIN_POSITIVE);
        if let Some(first) = col.iter().find(|x| x.abs() > 1e-12 * scale) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(k, &col);
    }
    (values, vectors)
}

/// Relative symmetry check `‖A − Aᵀ‖ ≤ tol·max(‖A‖, 1e-300)` in the Frobenius norm.
pub fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let asym = (a - a.transpose()).norm();
    asym <= tol * a.norm().max(1e-300)
}

/// Largest |eigenvalue| of a symmetric matrix.
pub fn symmetric_spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(a.clone()).eigenvalues.amax()
}

/// Largest singular value of a general matrix.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.min()
}

pub fn inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical(format!("{what} is singular")))
}

/// Builds a square matrix from row-major entries, inferring the side length.
pub fn square_from_row_major(entries: &[f64]) -> Result<DMatrix<f64>> {
    let n = (entries.len() as f64).sqrt().round() as usize;
    if n * n != entries.len() || n == 0 {
        return Err(shape(format!("{} entries do not form a square matrix", entries.len())));
    }
    Ok(DMatrix::from_row_slice(n, n, entries))
}

pub fn to_row_major(a: &DMatrix<f64>) -> Vec<f64> {
    (0..a.nrows()).flat_map(|i| (0..a.ncols()).map(move |j| a[(i, j)])).collect()
}
