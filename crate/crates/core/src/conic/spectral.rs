//! Eigenvalue helpers used by the estimators and the rounding routines.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::Point2;

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sym = 0.5 * (m + m.transpose());
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// True when the smallest eigenvalue of the symmetrized input is at least `-tol`.
pub fn psd_check(m: &DMatrix<f64>, tol: f64) -> Result<bool> {
    if !m.is_square() {
        return Err(Error::invalid(format!(
            "PSD check needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(min_eigenvalue(m) >= -tol)
}

/// Eigenvalues of a symmetric 2×2 matrix in ascending order.
pub fn eigenvalues2(c: &Matrix2<f64>) -> [f64; 2] {
    let eig = SymmetricEigen::new(0.5 * (c + c.transpose()));
    let (a, b) = (eig.eigenvalues[0], eig.eigenvalues[1]);
    if a <= b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Factor `V` with `VᵀV` equal to the PSD projection of `C`.
///
/// `C` is symmetrized, negative eigenvalues are clipped to zero and
/// `V = Λ^{1/2} Qᵀ`.
pub fn factor_covariance(c: &Matrix2<f64>) -> Matrix2<f64> {
    let sym = 0.5 * (c + c.transpose());
    let eig = SymmetricEigen::new(sym);
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Matrix2::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose()
}

/// `mean + Vᵀu` with `u ~ N(0, I)` and `V` from [`factor_covariance`].
pub fn gaussian_sample<R: Rng + ?Sized>(mean: Point2, c: &Matrix2<f64>, rng: &mut R) -> Point2 {
    let v = factor_covariance(c);
    gaussian_sample_factored(mean, &v, rng)
}

/// [`gaussian_sample`] with a precomputed factor.
pub fn gaussian_sample_factored<R: Rng + ?Sized>(
    mean: Point2,
    factor: &Matrix2<f64>,
    rng: &mut R,
) -> Point2 {
    let u = Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
    let d = factor.transpose() * u;
    Point2::new(mean.x + d[0], mean.y + d[1])
}

/// Largest eigenvalue and a unit eigenvector of a PSD matrix.
///
/// The eigenvector's first component with magnitude above `1e-12` is made
/// nonnegative.
pub fn rank_one_extract(x: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    if !psd_check(x, 1e-8)? {
        return Err(Error::Precondition(format!(
            "rank-one extraction needs a PSD matrix (min eigenvalue {:.3e})",
            min_eigenvalue(x)
        )));
    }
    let sym = 0.5 * (x + x.transpose());
    let eig = SymmetricEigen::new(sym);
    let imax = eig.eigenvalues.imax();
    let lambda = eig.eigenvalues[imax];
    let mut q: DVector<f64> = eig.eigenvectors.column(imax).into_owned();
    let norm = q.norm();
    if norm > 0.0 {
        q /= norm;
    }
    if let Some(first) = q.iter().copied().find(|v| v.abs() > 1e-12) {
        if first < 0.0 {
            q = -q;
        }
    }
    Ok((lambda, q))
}
