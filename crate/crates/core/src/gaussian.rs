//! Closed-form Gaussian entropy algebra. All entropies are in nats and all
//! vectors are zero-mean (entropy is translation invariant).

use crate::error::{Error, Result};
use crate::matrix::{self, Matrix, SymMatrix};
use crate::{math, LN_2PI_E};

/// `N(0, cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianVector {
    cov: SymMatrix,
}

impl GaussianVector {
    pub fn new(cov: SymMatrix, tol: f64) -> Result<Self> {
        let eig = matrix::sym_eig(&cov)?;
        let threshold = -tol * cov.frobenius_norm().max(1.0);
        if eig.min() < threshold {
            return Err(Error::NotPsd {
                what: "covariance",
                eigenvalue: eig.min(),
                threshold,
            });
        }
        Ok(Self { cov })
    }

    pub fn n(&self) -> usize {
        self.cov.n()
    }

    pub fn cov(&self) -> &SymMatrix {
        &self.cov
    }

    /// Differential entropy in nats; `-inf` when the covariance is singular
    /// (smallest eigenvalue at or below `tol * ||cov||`).
    pub fn entropy(&self, tol: f64) -> Result<f64> {
        gaussian_entropy(self, tol)
    }
}

/// `h = (n ln(2 pi e) + ln det cov) / 2`, or `-inf` for singular covariance.
pub fn gaussian_entropy(g: &GaussianVector, tol: f64) -> Result<f64> {
    let n = g.n() as f64;
    let eig = matrix::sym_eig(&g.cov)?;
    if eig.min() <= tol * g.cov.frobenius_norm() {
        return Ok(f64::NEG_INFINITY);
    }
    let log_det = match matrix::log_det_pd(&g.cov, "covariance") {
        Ok(v) => v,
        Err(_) => matrix::log_det_from_eigenvalues(&eig.eigenvalues),
    };
    Ok(0.5 * (n * LN_2PI_E + log_det))
}

/// `2h / n`, the logarithm of the entropy power.
#[inline]
pub fn log_entropy_power(h: f64, n: usize) -> f64 {
    2.0 * h / n as f64
}

/// `e^{2h/n}`; `h = -inf` maps to `0`.
#[inline]
pub fn entropy_power(h: f64, n: usize) -> f64 {
    math::exp(log_entropy_power(h, n))
}

/// Log entropy power of `N(0, cov)` straight from the covariance:
/// `ln(2 pi e) + ln det(cov) / n`.
pub fn gaussian_log_entropy_power(cov: &SymMatrix) -> Result<f64> {
    let log_det = matrix::log_det_psd(cov, "covariance")?;
    Ok(LN_2PI_E + log_det / cov.n() as f64)
}

/// `Cov(Z | M X + Z)` for independent `X ~ N(0, sigma_x)`, `Z ~ N(0, sigma_z)`.
pub fn conditional_cov(sigma_x: &SymMatrix, sigma_z: &SymMatrix, m: &Matrix) -> Result<SymMatrix> {
    let n = sigma_z.n();
    conditional_cov_with_noise_gain(sigma_x, sigma_z, m, &Matrix::identity(n, n))
}

/// `Cov(Z | M X + G Z) = sigma_z - sigma_z G^T (M sigma_x M^T + G sigma_z G^T)^{-1} G sigma_z`.
pub fn conditional_cov_with_noise_gain(
    sigma_x: &SymMatrix,
    sigma_z: &SymMatrix,
    m: &Matrix,
    gain: &Matrix,
) -> Result<SymMatrix> {
    let n = sigma_z.n();
    for (what, found) in [
        ("sigma_x", sigma_x.n()),
        ("observation matrix rows", m.nrows()),
        ("observation matrix cols", m.ncols()),
        ("noise gain rows", gain.nrows()),
        ("noise gain cols", gain.ncols()),
    ] {
        if found != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                found,
            });
        }
    }
    let observed = sigma_x.congruence(m).try_add(&sigma_z.congruence(gain))?;
    let cross = gain * sigma_z.as_matrix();
    let solved = matrix::cholesky_solve(&observed, &cross, "observation covariance")?;
    let reduction = cross.transpose() * solved;
    Ok(SymMatrix::from_symmetric_product(
        sigma_z.as_matrix() - reduction,
    ))
}
