//! Small dense linear-algebra helpers over nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<Complex64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().max()
}

/// Smallest singular value of `a` as a real-linear map on real vectors,
/// i.e. of `[Re a; Im a]`; zero when that stack has more columns than rows.
pub fn min_singular_value(a: &DMatrix<Complex64>) -> f64 {
    if a.is_empty() || a.ncols() > 2 * a.nrows() {
        return 0.0;
    }
    let n = a.nrows();
    DMatrix::from_fn(
        2 * n,
        a.ncols(),
        |i, j| if i < n { a[(i, j)].re } else { a[(i - n, j)].im },
    )
    .singular_values()
    .min()
}

/// `(lambda_min, lambda_max)` of a real symmetric matrix.
pub fn symmetric_extremes(a: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(a.clone());
    (eig.eigenvalues.min(), eig.eigenvalues.max())
}

/// `Re{J^* J}`, the Gauss-Newton part of the objective Hessian.
pub fn gram_real(j: &DMatrix<Complex64>) -> DMatrix<f64> {
    (j.adjoint() * j).map(|z| z.re)
}
