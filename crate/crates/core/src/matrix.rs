//! Dense symmetric-matrix numerics.
//!
//! [`SymMatrix`] is the currency of the whole crate: covariances, the
//! weighting matrix `A`, its square root and the perturbation matrices are
//! all stored as exactly symmetric dense matrices. The symmetric eigensolver
//! is a cyclic Jacobi iteration; it is slow for large `n` but accurate to
//! working precision in every eigenvalue, which matters for the
//! ill-conditioned covariances this crate deals with (`n` stays well under a
//! hundred).
//!
//! Norms: unless stated otherwise `||M||` is the Frobenius norm.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::math;

/// General dense matrix, used for products that need not be symmetric.
pub type Matrix = DMatrix<f64>;

const MAX_SWEEPS: usize = 100;

/// Components with magnitude at or below this count as zero for the
/// eigenvector sign convention.
const SIGN_EPS: f64 = 1e-12;

/// Dense real symmetric `n x n` matrix with `m[i][j] == m[j][i]` bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: Matrix,
}

impl SymMatrix {
    /// Wraps a square matrix, replacing it by `(M + M^T) / 2`.
    pub fn new(m: Matrix) -> Result<Self> {
        Self::checked(m, "matrix")
    }

    pub(crate) fn checked(mut m: Matrix, what: &'static str) -> Result<Self> {
        if m.nrows() == 0 {
            return Err(Error::Empty { what });
        }
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                what,
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what });
        }
        symmetrize_in_place(&mut m);
        Ok(Self { inner: m })
    }

    /// Builds from `n * n` row-major values.
    pub fn from_row_slice(n: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                what: "row-major values",
                expected: n * n,
                found: values.len(),
            });
        }
        Self::new(Matrix::from_row_slice(n, n, values))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: Matrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: Matrix::zeros(n, n),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::new(Matrix::from_fn(
            n,
            n,
            |i, j| if i == j { diag[i] } else { 0.0 },
        ))
    }

    /// `B * self * B^T`, symmetrized.
    pub fn congruence(&self, b: &Matrix) -> Self {
        let mut m = b * &self.inner * b.transpose();
        symmetrize_in_place(&mut m);
        Self { inner: m }
    }

    /// Symmetrizes a product that is symmetric in exact arithmetic.
    pub(crate) fn from_symmetric_product(mut m: Matrix) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        symmetrize_in_place(&mut m);
        Self { inner: m }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn into_matrix(self) -> Matrix {
        self.inner
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.inner[(i, i)]).collect()
    }

    /// Row-major copy of the entries.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| (0..self.n()).map(|j| self.inner[(i, j)]).collect())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.inner)
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn try_add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        same_dim(self, other)?;
        Ok(Self {
            inner: &self.inner + &other.inner,
        })
    }

    pub fn try_sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        same_dim(self, other)?;
        Ok(Self {
            inner: &self.inner - &other.inner,
        })
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        Self {
            inner: &self.inner * c,
        }
    }

    /// `I - self`.
    pub fn complement(&self) -> SymMatrix {
        Self {
            inner: Matrix::identity(self.n(), self.n()) - &self.inner,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..n).all(|j| i == j || self.inner[(i, j)] == 0.0))
    }
}

fn symmetrize_in_place(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Largest entry magnitude.
pub fn max_abs_of(m: &Matrix) -> f64 {
    max_abs(m)
}

pub(crate) fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

fn same_dim(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.n() == b.n() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what: "matrix pair",
            expected: a.n(),
            found: b.n(),
        })
    }
}

/// `M = V diag(lambda) V^T` with eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Orthogonal; column `i` belongs to `eigenvalues[i]`. The first
    /// component of each column that is not negligible is positive.
    pub basis: Matrix,
}

impl EigenDecomposition {
    /// `V f(diag) V^T`.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> SymMatrix {
        let n = self.eigenvalues.len();
        let mut scaled = self.basis.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let fj = f(lambda);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        SymMatrix::from_symmetric_product(scaled * self.basis.transpose())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map(|x| x)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }
}

/// Cyclic Jacobi eigendecomposition.
pub fn sym_eig(m: &SymMatrix) -> Result<EigenDecomposition> {
    let n = m.n();
    let mut a = m.as_matrix().clone();
    let mut v = Matrix::identity(n, n);

    let mut converged = false;
    for sweep in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)].abs())
            .sum();
        if off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let h = aqq - app;
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let t = 1.0 / (theta.abs() + math::sqrt(1.0 + theta * theta));
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = t * c;
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a[(r, p)];
                        let arq = a[(r, q)];
                        let new_rp = c * arp - s * arq;
                        let new_rq = s * arp + c * arq;
                        a[(r, p)] = new_rp;
                        a[(p, r)] = new_rp;
                        a[(r, q)] = new_rq;
                        a[(q, r)] = new_rq;
                    }
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = s * vrp + c * vrq;
                }
            }
        }
    }
    if !converged {
        let off = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)] * a[(p, q)])
            .sum::<f64>();
        return Err(Error::NoConvergence {
            n,
            sweeps: MAX_SWEEPS,
            off_diagonal: math::sqrt(off),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]).then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let mut basis = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let lead = (0..n).map(|r| v[(r, src)]).find(|x| x.abs() > SIGN_EPS);
        let flip = matches!(lead, Some(x) if x < 0.0);
        for r in 0..n {
            basis[(r, dst)] = if flip { -v[(r, src)] } else { v[(r, src)] };
        }
    }
    Ok(EigenDecomposition { eigenvalues, basis })
}

/// Unique PSD square root. Eigenvalues in `[-tol ||M||, 0)` are clamped to
/// zero; anything more negative is an error.
pub fn psd_sqrt(m: &SymMatrix, tol: f64) -> Result<SymMatrix> {
    let eig = sym_eig(m)?;
    psd_sqrt_from_eig(&eig, m.frobenius_norm(), tol, "matrix")
}

pub(crate) fn psd_sqrt_from_eig(
    eig: &EigenDecomposition,
    norm: f64,
    tol: f64,
    what: &'static str,
) -> Result<SymMatrix> {
    let threshold = -tol * norm;
    if eig.min() < threshold {
        return Err(Error::NotPsd {
            what,
            eigenvalue: eig.min(),
            threshold,
        });
    }
    Ok(eig.map(|x| math::sqrt(x.max(0.0))))
}

/// `min eig(M) >= -tol * max(1, ||M||)`.
pub fn is_psd(m: &SymMatrix, tol: f64) -> bool {
    match sym_eig(m) {
        Ok(eig) => eig.min() >= -tol * m.frobenius_norm().max(1.0),
        Err(_) => false,
    }
}

/// `A <= B` in the Loewner order.
pub fn loewner_leq(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<bool> {
    Ok(is_psd(&b.try_sub(a)?, tol))
}

/// Max-abs entry of `AB - BA`.
pub fn commutator_norm(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    same_dim(a, b)?;
    let ab = a.as_matrix() * b.as_matrix();
    let ba = b.as_matrix() * a.as_matrix();
    Ok(max_abs(&(ab - ba)))
}

fn commute_threshold(a: &SymMatrix, b: &SymMatrix, tol: f64) -> f64 {
    tol * (1.0 + a.frobenius_norm() * b.frobenius_norm())
}

/// `||AB - BA||_maxabs <= tol (1 + ||A|| ||B||)`.
pub fn commutes(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<bool> {
    Ok(commutator_norm(a, b)? <= commute_threshold(a, b, tol))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimultaneousDiagonalization {
    /// Orthogonal `U` with `U^T A U` and `U^T B U` diagonal.
    pub basis: Matrix,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Largest off-diagonal magnitude left in either rotated matrix, relative
    /// to `1 + ||.||` of that matrix.
    pub residual: f64,
}

/// Common eigenbasis of two commuting symmetric matrices.
///
/// `A` is diagonalized first; `B` is then diagonalized inside each cluster of
/// (numerically) equal eigenvalues of `A`.
pub fn simultaneous_diagonalize(
    a: &SymMatrix,
    b: &SymMatrix,
    tol: f64,
) -> Result<SimultaneousDiagonalization> {
    let commutator = commutator_norm(a, b)?;
    let threshold = commute_threshold(a, b, tol);
    if commutator > threshold {
        return Err(Error::NotCommuting {
            commutator,
            threshold,
        });
    }
    let n = a.n();
    let eig_a = sym_eig(a)?;
    let cluster_gap = math::sqrt(tol) * a.frobenius_norm().max(1.0);

    let mut basis = eig_a.basis.clone();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eig_a.eigenvalues[end] - eig_a.eigenvalues[end - 1] <= cluster_gap {
            end += 1;
        }
        if end - start > 1 {
            let block = eig_a.basis.columns(start, end - start).into_owned();
            let restricted =
                SymMatrix::from_symmetric_product(block.transpose() * b.as_matrix() * &block);
            let inner = sym_eig(&restricted)?;
            let rotated = &block * &inner.basis;
            basis.columns_mut(start, end - start).copy_from(&rotated);
        }
        start = end;
    }

    let ra = basis.transpose() * a.as_matrix() * &basis;
    let rb = basis.transpose() * b.as_matrix() * &basis;
    let off = |m: &Matrix| {
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(m[(i, j)].abs());
                }
            }
        }
        worst
    };
    let residual =
        (off(&ra) / (1.0 + a.frobenius_norm())).max(off(&rb) / (1.0 + b.frobenius_norm()));
    if residual > tol {
        return Err(Error::NotDiagonalized {
            residual,
            threshold: tol,
        });
    }
    Ok(SimultaneousDiagonalization {
        a: (0..n).map(|i| ra[(i, i)]).collect(),
        b: (0..n).map(|i| rb[(i, i)]).collect(),
        basis,
        residual,
    })
}

/// `ln det M` for positive definite `M`, via Cholesky.
pub fn log_det_pd(m: &SymMatrix, what: &'static str) -> Result<f64> {
    let chol = m
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or(Error::Singular { what })?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..m.n() {
        let d = l[(i, i)];
        if !(d > 0.0) {
            return Err(Error::Singular { what });
        }
        acc += math::ln(d);
    }
    Ok(2.0 * acc)
}

/// `ln det M` for PSD `M`; `-inf` when singular.
pub fn log_det_psd(m: &SymMatrix, what: &'static str) -> Result<f64> {
    if let Ok(v) = log_det_pd(m, what) {
        return Ok(v);
    }
    let eig = sym_eig(m)?;
    Ok(log_det_from_eigenvalues(&eig.eigenvalues))
}

pub(crate) fn log_det_from_eigenvalues(values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &v in values {
        if v <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += math::ln(v);
    }
    acc
}

/// Solves `M X = rhs` for positive definite `M`.
pub fn cholesky_solve(m: &SymMatrix, rhs: &Matrix, what: &'static str) -> Result<Matrix> {
    let chol = m
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or(Error::Singular { what })?;
    Ok(chol.solve(rhs))
}
