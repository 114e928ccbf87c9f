//! Evaluators for the generalized entropy power inequality
//!
//! ```text
//! N(X + A^{1/2} Z) >= |I - A|^{1/n} N(X) + |A|^{1/n} N(X + Z)
//! ```
//!
//! on the Gaussian slice `X ~ N(0, Sigma_X)`, together with the identities and
//! diagnostics around it: the noise-splitting identity that only holds for
//! commuting `(A, Sigma_Z)`, the three-variable inequality it is derived
//! from, the AM-GM step along the perturbation path
//! `D_gamma = (I + gamma (A - I))^{1/2}`, and the reduction of a commuting
//! instance to `Sigma_Z = I` with diagonal `A`.
//!
//! Everything is evaluated through log-determinants so that nothing
//! overflows for large or badly conditioned covariances.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gaussian;
use crate::math;
use crate::matrix::{self, EigenDecomposition, Matrix, SymMatrix};
use crate::{LN_2PI_E, SQRT_CLAMP_TOL};

/// Largest admissible perturbation parameter; `D_gamma^{-2}` may not exist
/// at `gamma = 1`.
pub const GAMMA_MAX: f64 = 1.0 - 1e-12;

/// A triple `(Sigma_X, Sigma_Z, A)` with `Sigma_X, Sigma_Z >= 0` and
/// `0 <= A <= I`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpiInstance {
    sigma_x: SymMatrix,
    sigma_z: SymMatrix,
    a: SymMatrix,
    a_sqrt: SymMatrix,
    a_eig: EigenDecomposition,
}

impl EpiInstance {
    pub fn new(sigma_x: SymMatrix, sigma_z: SymMatrix, a: SymMatrix, tol: f64) -> Result<Self> {
        let n = sigma_x.n();
        for (what, m) in [("sigma_z", &sigma_z), ("a", &a)] {
            if m.n() != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found: m.n(),
                });
            }
        }
        for (what, m) in [("sigma_x", &sigma_x), ("sigma_z", &sigma_z)] {
            let eig = matrix::sym_eig(m)?;
            let threshold = -tol * m.frobenius_norm().max(1.0);
            if eig.min() < threshold {
                return Err(Error::NotPsd {
                    what,
                    eigenvalue: eig.min(),
                    threshold,
                });
            }
        }
        let a_eig = matrix::sym_eig(&a)?;
        let band = tol * a.frobenius_norm().max(1.0);
        if a_eig.min() < -band {
            return Err(Error::NotPsd {
                what: "a",
                eigenvalue: a_eig.min(),
                threshold: -band,
            });
        }
        if 1.0 - a_eig.max() < -band {
            return Err(Error::NotBelowIdentity {
                what: "a",
                eigenvalue: 1.0 - a_eig.max(),
            });
        }
        let a_sqrt =
            matrix::psd_sqrt_from_eig(&a_eig, a.frobenius_norm(), tol.max(SQRT_CLAMP_TOL), "a")?;
        Ok(Self {
            sigma_x,
            sigma_z,
            a,
            a_sqrt,
            a_eig,
        })
    }

    /// Builds the instance from `A^{1/2}`; `A` is its square.
    pub fn from_a_sqrt(
        sigma_x: SymMatrix,
        sigma_z: SymMatrix,
        a_sqrt: &SymMatrix,
        tol: f64,
    ) -> Result<Self> {
        let a = SymMatrix::from_symmetric_product(a_sqrt.as_matrix() * a_sqrt.as_matrix());
        Self::new(sigma_x, sigma_z, a, tol)
    }

    pub fn n(&self) -> usize {
        self.sigma_x.n()
    }

    pub fn sigma_x(&self) -> &SymMatrix {
        &self.sigma_x
    }

    pub fn sigma_z(&self) -> &SymMatrix {
        &self.sigma_z
    }

    pub fn a(&self) -> &SymMatrix {
        &self.a
    }

    /// PSD square root of `A`.
    pub fn a_sqrt(&self) -> &SymMatrix {
        &self.a_sqrt
    }

    /// Eigenvalues of `A`, ascending, clamped into `[0, 1]`.
    pub fn a_eigenvalues(&self) -> Vec<f64> {
        self.a_eig
            .eigenvalues
            .iter()
            .map(|x| x.clamp(0.0, 1.0))
            .collect()
    }

    pub fn commutes(&self, tol: f64) -> bool {
        matrix::commutes(&self.a, &self.sigma_z, tol).unwrap_or(false)
    }
}

/// Log-determinants behind a [`costa_check`] report. `-inf` marks a
/// singular matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Determinants {
    pub log_i_minus_a: f64,
    pub log_a: f64,
    pub log_sigma_x: f64,
    pub log_sigma_x_plus_z: f64,
    /// `ln det(Sigma_X + A^{1/2} Sigma_Z A^{1/2})`.
    pub log_lhs_cov: f64,
}

impl Determinants {
    pub fn i_minus_a(&self) -> f64 {
        math::exp(self.log_i_minus_a)
    }

    pub fn a(&self) -> f64 {
        math::exp(self.log_a)
    }

    pub fn sigma_x(&self) -> f64 {
        math::exp(self.log_sigma_x)
    }

    pub fn sigma_x_plus_z(&self) -> f64 {
        math::exp(self.log_sigma_x_plus_z)
    }

    pub fn lhs_cov(&self) -> f64 {
        math::exp(self.log_lhs_cov)
    }
}

/// Both sides of an entropy power inequality `lhs >= rhs_term_x + rhs_term_xz`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpiReport {
    pub lhs: f64,
    pub rhs_term_x: f64,
    pub rhs_term_xz: f64,
    pub rhs: f64,
    /// `lhs - rhs`.
    pub gap: f64,
    /// `gap < -tol * max(lhs, rhs)`.
    pub violated: bool,
    pub tol: f64,
    /// Only filled by [`costa_check`].
    pub dets: Option<Determinants>,
}

impl EpiReport {
    fn assemble(
        lhs: f64,
        rhs_term_x: f64,
        rhs_term_xz: f64,
        tol: f64,
        dets: Option<Determinants>,
    ) -> Self {
        let rhs = rhs_term_x + rhs_term_xz;
        let gap = lhs - rhs;
        Self {
            lhs,
            rhs_term_x,
            rhs_term_xz,
            rhs,
            gap,
            violated: gap < -tol * lhs.max(rhs),
            tol,
            dets,
        }
    }

    pub fn scale(&self) -> f64 {
        self.lhs.max(self.rhs)
    }

    /// `gap / max(lhs, rhs)`, in `[-1, 1]`; zero when both sides vanish.
    pub fn relative_gap(&self) -> f64 {
        let s = self.scale();
        if s > 0.0 {
            self.gap / s
        } else {
            0.0
        }
    }
}

fn exp_sum(terms: &[f64]) -> f64 {
    if terms.contains(&f64::NEG_INFINITY) {
        0.0
    } else {
        math::exp(terms.iter().sum())
    }
}

/// Evaluates both sides of the generalized inequality for Gaussian `X`.
pub fn costa_check(inst: &EpiInstance, tol: f64) -> Result<EpiReport> {
    let n = inst.n() as f64;
    let eigen_a = inst.a_eigenvalues();
    let log_a = matrix::log_det_from_eigenvalues(&eigen_a);
    let complement: Vec<f64> = eigen_a.iter().map(|x| 1.0 - x).collect();
    let log_i_minus_a = matrix::log_det_from_eigenvalues(&complement);

    let lhs_cov = inst
        .sigma_x
        .try_add(&inst.sigma_z.congruence(inst.a_sqrt.as_matrix()))?;
    let log_lhs_cov = matrix::log_det_pd(&lhs_cov, "sigma_x + a_sqrt sigma_z a_sqrt")?;
    let log_sigma_x = matrix::log_det_psd(&inst.sigma_x, "sigma_x")?;
    let log_sigma_x_plus_z =
        matrix::log_det_psd(&inst.sigma_x.try_add(&inst.sigma_z)?, "sigma_x + sigma_z")?;

    let lhs = math::exp(LN_2PI_E + log_lhs_cov / n);
    let term_x = exp_sum(&[LN_2PI_E, log_i_minus_a / n, log_sigma_x / n]);
    let term_xz = exp_sum(&[LN_2PI_E, log_a / n, log_sigma_x_plus_z / n]);
    let dets = Determinants {
        log_i_minus_a,
        log_a,
        log_sigma_x,
        log_sigma_x_plus_z,
        log_lhs_cov,
    };
    Ok(EpiReport::assemble(lhs, term_x, term_xz, tol, Some(dets)))
}

/// [`costa_check`] restricted to commuting `(A, Sigma_Z)`, where the
/// inequality is a theorem. A violation here is reported as an error.
pub fn theorem1_check(inst: &EpiInstance, tol: f64) -> Result<EpiReport> {
    require_commuting(inst, tol)?;
    let report = costa_check(inst, tol)?;
    if report.violated {
        return Err(Error::CommutingCaseViolated {
            gap: report.gap,
            scale: report.scale(),
        });
    }
    Ok(report)
}

fn require_commuting(inst: &EpiInstance, tol: f64) -> Result<()> {
    let commutator = matrix::commutator_norm(&inst.a, &inst.sigma_z)?;
    let threshold = tol * (1.0 + inst.a.frobenius_norm() * inst.sigma_z.frobenius_norm());
    if commutator > threshold {
        Err(Error::NotCommuting {
            commutator,
            threshold,
        })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplittingResidual {
    /// `A^{1/2} Sz A^{1/2} + (I-A)^{1/2} Sz (I-A)^{1/2} - Sz`.
    pub residual: SymMatrix,
    /// Max-abs entry of `residual`.
    pub norm: f64,
}

/// Residual of the noise-splitting identity; zero exactly when `A` and
/// `Sigma_Z` commute.
pub fn splitting_identity_residual(
    a: &SymMatrix,
    sigma_z: &SymMatrix,
) -> Result<SplittingResidual> {
    if a.n() != sigma_z.n() {
        return Err(Error::DimensionMismatch {
            what: "sigma_z",
            expected: a.n(),
            found: sigma_z.n(),
        });
    }
    let root = matrix::psd_sqrt(a, SQRT_CLAMP_TOL)?;
    let co_root = matrix::psd_sqrt(&a.complement(), SQRT_CLAMP_TOL)?;
    let sum = sigma_z
        .congruence(root.as_matrix())
        .try_add(&sigma_z.congruence(co_root.as_matrix()))?;
    let residual = sum.try_sub(sigma_z)?;
    let norm = residual.max_abs();
    Ok(SplittingResidual { residual, norm })
}

/// Three-variable inequality for independent Gaussians `X, Y, W`:
/// `N(X+W) N(Y+W) >= N(X) N(Y) + N(W) N(X+Y+W)`.
pub fn triple_epi_check(
    sigma_x: &SymMatrix,
    sigma_y: &SymMatrix,
    sigma_w: &SymMatrix,
    tol: f64,
) -> Result<EpiReport> {
    let n = sigma_x.n();
    for (what, m) in [("sigma_y", sigma_y), ("sigma_w", sigma_w)] {
        if m.n() != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                found: m.n(),
            });
        }
    }
    let lep = |m: &SymMatrix, what: &'static str| -> Result<f64> {
        Ok(LN_2PI_E + matrix::log_det_pd(m, what)? / n as f64)
    };
    let x = lep(sigma_x, "sigma_x")?;
    let y = lep(sigma_y, "sigma_y")?;
    let w = lep(sigma_w, "sigma_w")?;
    let xw = lep(&sigma_x.try_add(sigma_w)?, "sigma_x + sigma_w")?;
    let yw = lep(&sigma_y.try_add(sigma_w)?, "sigma_y + sigma_w")?;
    let xyw = lep(
        &sigma_x.try_add(sigma_y)?.try_add(sigma_w)?,
        "sigma_x + sigma_y + sigma_w",
    )?;
    Ok(EpiReport::assemble(
        math::exp(xw + yw),
        math::exp(x + y),
        math::exp(w + xyw),
        tol,
        None,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

/// AM-GM diagnostic at one point of the perturbation path.
///
/// The matrix under test is
///
/// ```text
/// K = Sigma_Z^{-1} Cov(Z | D X + A^{1/2} Z) (D^{-2} - I),   D = (I + gamma (A - I))^{1/2}
/// ```
///
/// All three factors are PSD but `K` itself need not be; when it is not, the
/// inequality `det(K)^{1/n} <= tr(K) / n` can fail. When `A` commutes with
/// `Sigma_Z`, `K` is similar to the PSD matrix
/// `E^{1/2} Sigma_Z^{-1/2} Cov Sigma_Z^{-1/2} E^{1/2}` with `E = D^{-2} - I`,
/// and the two traces agree.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaDiagnostic {
    pub gamma: f64,
    pub d_gamma: SymMatrix,
    pub cond_cov: SymMatrix,
    pub k_matrix: Matrix,
    /// Sorted by real part, then imaginary part.
    pub eigenvalues: Vec<Eigenvalue>,
    /// Some eigenvalue has an imaginary part above tolerance.
    pub has_complex: bool,
    pub det_k: f64,
    /// `det(K)^{1/n}`; `None` when `det(K) < 0` and `n` is even.
    pub det_side: Option<f64>,
    pub trace_side: f64,
    pub amgm_holds: bool,
    /// `K` is symmetric within tolerance and PSD.
    pub k_psd: bool,
    /// `tr(E^{1/2} Sigma_Z^{-1/2} Cov Sigma_Z^{-1/2} E^{1/2}) / n`.
    pub symmetrized_trace_side: f64,
    /// `|trace_side - symmetrized_trace_side|`; zero when `A` and `Sigma_Z` commute.
    pub trace_identity_residual: f64,
}

/// Runs [`gamma_diagnostic`] for each `gamma`.
pub fn gamma_path(inst: &EpiInstance, gammas: &[f64], tol: f64) -> Result<Vec<GammaDiagnostic>> {
    gammas
        .iter()
        .map(|&g| gamma_diagnostic(inst, g, tol))
        .collect()
}

pub fn gamma_diagnostic(inst: &EpiInstance, gamma: f64, tol: f64) -> Result<GammaDiagnostic> {
    if !(0.0..GAMMA_MAX).contains(&gamma) {
        return Err(Error::Domain {
            what: "gamma",
            value: gamma,
            reason: "must lie in [0, 1); at gamma = 1 the perturbation D may be singular",
        });
    }
    let n = inst.n();
    let nf = n as f64;
    let id = SymMatrix::identity(n);
    let d_squared = id.scale(1.0 - gamma).try_add(&inst.a.scale(gamma))?;
    let eig_d2 = matrix::sym_eig(&d_squared)?;
    if eig_d2.min() <= 0.0 {
        return Err(Error::Singular { what: "D_gamma^2" });
    }
    let d_gamma = eig_d2.map(math::sqrt);
    let excess = eig_d2.map(|x| (1.0 / x - 1.0).max(0.0));
    let excess_sqrt = eig_d2.map(|x| math::sqrt((1.0 / x - 1.0).max(0.0)));
    debug_assert!({
        let sq = d_gamma.as_matrix() * d_gamma.as_matrix();
        matrix::max_abs(&(sq - d_squared.as_matrix())) <= 1e-9 * d_squared.frobenius_norm()
    });

    let cond_cov = gaussian::conditional_cov_with_noise_gain(
        &inst.sigma_x,
        &inst.sigma_z,
        d_gamma.as_matrix(),
        inst.a_sqrt.as_matrix(),
    )?;
    let whitened = matrix::cholesky_solve(&inst.sigma_z, cond_cov.as_matrix(), "sigma_z")?;
    let k_matrix = whitened * excess.as_matrix();

    let mut eigenvalues: Vec<Eigenvalue> = k_matrix
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|c| Eigenvalue { re: c.re, im: c.im })
        .collect();
    eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let radius = eigenvalues
        .iter()
        .fold(0.0_f64, |m, e| m.max(math::hypot(e.re, e.im)));
    let has_complex = eigenvalues
        .iter()
        .any(|e| e.im.abs() > tol * (1.0 + radius));

    let det_k = k_matrix.determinant();
    let det_side = if det_k >= 0.0 {
        Some(math::powf(det_k, 1.0 / nf))
    } else if n % 2 == 1 {
        Some(-math::powf(-det_k, 1.0 / nf))
    } else {
        None
    };
    let trace_side = k_matrix.trace() / nf;
    let amgm_holds = det_side.is_some_and(|d| d <= trace_side + tol * trace_side.abs().max(1.0));

    let k_scale = matrix::max_abs(&k_matrix);
    let asymmetry = matrix::max_abs(&(&k_matrix - k_matrix.transpose()));
    let k_psd = asymmetry <= tol * (1.0 + k_scale)
        && matrix::is_psd(&SymMatrix::from_symmetric_product(k_matrix.clone()), tol);

    let sz_inv_sqrt = matrix::sym_eig(&inst.sigma_z)?.map(|x| 1.0 / math::sqrt(x));
    let middle = cond_cov.congruence(sz_inv_sqrt.as_matrix());
    let symmetrized = middle.congruence(excess_sqrt.as_matrix());
    let symmetrized_trace_side = symmetrized.trace() / nf;

    Ok(GammaDiagnostic {
        gamma,
        d_gamma,
        cond_cov,
        k_matrix,
        eigenvalues,
        has_complex,
        det_k,
        det_side,
        trace_side,
        amgm_holds,
        k_psd,
        symmetrized_trace_side,
        trace_identity_residual: (trace_side - symmetrized_trace_side).abs(),
    })
}

/// Commuting instance rewritten with `Sigma_Z = I` and diagonal `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    pub instance: EpiInstance,
    /// `det(Sigma_Z)^{1/n}`; every term of the inequality scales by it.
    pub scale: f64,
    /// Common eigenbasis `U` of `A` and `Sigma_Z`.
    pub basis: Matrix,
}

/// Maps a commuting instance to `Sigma_Z' = I`, `A' = U^T A U` (diagonal,
/// entries in `[0, 1]`) and
/// `Sigma_X' = Lambda^{-1/2} U^T Sigma_X U Lambda^{-1/2}`.
pub fn reduce_to_canonical(inst: &EpiInstance, tol: f64) -> Result<CanonicalForm> {
    let sd = matrix::simultaneous_diagonalize(&inst.a, &inst.sigma_z, tol)?;
    let n = inst.n();
    let floor = tol * inst.sigma_z.frobenius_norm();
    if sd.b.iter().any(|&l| l <= floor) {
        return Err(Error::Singular { what: "sigma_z" });
    }
    let mut whiten = sd.basis.transpose();
    for (i, &l) in sd.b.iter().enumerate() {
        let s = 1.0 / math::sqrt(l);
        for j in 0..n {
            whiten[(i, j)] *= s;
        }
    }
    let sigma_x = inst.sigma_x.congruence(&whiten);
    let a_diag: Vec<f64> = sd.a.iter().map(|x| x.clamp(0.0, 1.0)).collect();
    let a = SymMatrix::from_diagonal(&a_diag)?;
    let log_scale = sd.b.iter().map(|&l| math::ln(l)).sum::<f64>() / n as f64;
    Ok(CanonicalForm {
        instance: EpiInstance::new(sigma_x, SymMatrix::identity(n), a, tol)?,
        scale: math::exp(log_scale),
        basis: sd.basis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::{DEFAULT_TOL, TWO_PI_E};

    #[test]
    fn fixture_reproduces_published_values() {
        let r = costa_check(&fixtures::counterexample(), DEFAULT_TOL).unwrap();
        assert!(
            (r.lhs / TWO_PI_E - 19.53).abs() < 0.005,
            "{}",
            r.lhs / TWO_PI_E
        );
        assert!(
            (r.rhs / TWO_PI_E - 40.28).abs() < 0.005,
            "{}",
            r.rhs / TWO_PI_E
        );
        assert!(r.violated);
    }

    #[test]
    fn endpoints_close_the_gap() {
        let inst = fixtures::counterexample();
        for a in [SymMatrix::identity(2), SymMatrix::zeros(2)] {
            let e = EpiInstance::new(
                inst.sigma_x().clone(),
                inst.sigma_z().clone(),
                a,
                DEFAULT_TOL,
            )
            .unwrap();
            let r = costa_check(&e, DEFAULT_TOL).unwrap();
            assert!(r.gap.abs() <= 1e-12 * r.scale(), "gap {}", r.gap);
            assert!(!r.violated);
        }
    }

    #[test]
    fn identity_weight_equals_sum_covariance() {
        let inst = fixtures::counterexample();
        let e = EpiInstance::new(
            inst.sigma_x().clone(),
            inst.sigma_z().clone(),
            SymMatrix::identity(2),
            1e-9,
        )
        .unwrap();
        let r = costa_check(&e, 1e-9).unwrap();
        // det(Sx + Sz) = 400 * 52 - 100^2
        let want = TWO_PI_E * (400.0_f64 * 52.0 - 10_000.0).sqrt();
        assert!((r.lhs - want).abs() < 1e-10 * want);
        assert_eq!(r.rhs_term_x, 0.0);
    }

    #[test]
    fn instance_validation() {
        let id = SymMatrix::identity(2);
        let too_big = id.scale(1.5);
        assert!(matches!(
            EpiInstance::new(id.clone(), id.clone(), too_big, 1e-9),
            Err(Error::NotBelowIdentity { .. })
        ));
        let neg = SymMatrix::from_diagonal(&[-1.0, 1.0]).unwrap();
        assert!(matches!(
            EpiInstance::new(neg.clone(), id.clone(), id.scale(0.5), 1e-9),
            Err(Error::NotPsd {
                what: "sigma_x",
                ..
            })
        ));
        assert!(EpiInstance::new(id.clone(), SymMatrix::identity(3), id, 1e-9).is_err());
    }

    #[test]
    fn splitting_identity_cases() {
        let sz = SymMatrix::from_row_slice(2, &[3.0, 1.0, 1.0, 2.0]).unwrap();
        let r = splitting_identity_residual(&SymMatrix::identity(2).scale(0.5), &sz).unwrap();
        assert!(r.norm < 1e-14);

        let a = SymMatrix::from_diagonal(&[0.2, 0.7]).unwrap();
        let r = splitting_identity_residual(&a, &SymMatrix::from_diagonal(&[5.0, 0.1]).unwrap())
            .unwrap();
        assert!(r.norm < 1e-14);

        let inst = fixtures::counterexample();
        let r = splitting_identity_residual(inst.a(), inst.sigma_z()).unwrap();
        assert!(r.norm > 0.1, "{}", r.norm);
    }

    #[test]
    fn splitting_residual_matches_direct_two_by_two_evaluation() {
        // Oracle: explicit 2x2 arithmetic with the published root and a
        // closed-form 2x2 square root of I - A.
        let r = [[0.5, 0.25], [0.25, 0.85]];
        let a = mul2(r, r);
        let c = [[1.0 - a[0][0], -a[0][1]], [-a[1][0], 1.0 - a[1][1]]];
        // sqrt of 2x2 SPD: (C + sqrt(det) I) / sqrt(tr + 2 sqrt(det))
        let sd = (c[0][0] * c[1][1] - c[0][1] * c[1][0]).sqrt();
        let t = (c[0][0] + c[1][1] + 2.0 * sd).sqrt();
        let s = [
            [(c[0][0] + sd) / t, c[0][1] / t],
            [c[1][0] / t, (c[1][1] + sd) / t],
        ];
        let z = [[200.0, 0.0], [0.0, 1.0]];
        let lhs1 = mul2(mul2(r, z), r);
        let lhs2 = mul2(mul2(s, z), s);
        let mut worst = 0.0_f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((lhs1[i][j] + lhs2[i][j] - z[i][j]).abs());
            }
        }
        let inst = fixtures::counterexample();
        let got = splitting_identity_residual(inst.a(), inst.sigma_z()).unwrap();
        assert!(
            (got.norm - worst).abs() < 1e-9 * worst,
            "{} vs {worst}",
            got.norm
        );
    }

    fn mul2(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let mut c = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        c
    }

    #[test]
    fn triple_equality_for_matched_scalars() {
        let id = SymMatrix::identity(1);
        let r = triple_epi_check(&id, &id, &id, 1e-9).unwrap();
        let e2 = TWO_PI_E * TWO_PI_E;
        assert!((r.lhs - 4.0 * e2).abs() < 1e-12 * e2);
        assert!((r.rhs - 4.0 * e2).abs() < 1e-12 * e2);
        assert!(r.gap.abs() < 1e-9 * r.scale());
        assert!(r.dets.is_none());
    }

    #[test]
    fn triple_rejects_singular() {
        let id = SymMatrix::identity(2);
        let z = SymMatrix::zeros(2);
        assert!(matches!(
            triple_epi_check(&z, &id, &id, 1e-9),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn commuting_checks() {
        let inst = fixtures::counterexample();
        let diag = EpiInstance::new(
            inst.sigma_x().clone(),
            SymMatrix::from_diagonal(&[200.0, 1.0]).unwrap(),
            SymMatrix::from_diagonal(&[0.25, 0.81]).unwrap(),
            1e-9,
        )
        .unwrap();
        let r = theorem1_check(&diag, 1e-9).unwrap();
        assert!(r.gap >= 0.0);

        assert!(matches!(
            theorem1_check(&inst, 1e-9),
            Err(Error::NotCommuting { .. })
        ));

        let scalar = EpiInstance::new(
            SymMatrix::from_diagonal(&[3.0]).unwrap(),
            SymMatrix::from_diagonal(&[0.2]).unwrap(),
            SymMatrix::from_diagonal(&[0.4]).unwrap(),
            1e-9,
        )
        .unwrap();
        let r = theorem1_check(&scalar, 1e-9).unwrap();
        assert!(r.gap >= -1e-12 * r.scale());
    }

    #[test]
    fn gamma_zero_is_trivial() {
        let d = gamma_diagnostic(&fixtures::counterexample(), 0.0, 1e-9).unwrap();
        assert_eq!(d.d_gamma, SymMatrix::identity(2));
        assert!(matrix::max_abs(&d.k_matrix) == 0.0);
        assert!(d.eigenvalues.iter().all(|e| e.re == 0.0 && e.im == 0.0));
        assert_eq!(d.det_side, Some(0.0));
        assert_eq!(d.trace_side, 0.0);
        assert!(d.amgm_holds && d.k_psd);
    }

    #[test]
    fn gamma_half_reproduces_published_eigenvalues() {
        let d = gamma_diagnostic(&fixtures::counterexample(), 0.5, 1e-9).unwrap();
        assert!(!d.has_complex);
        assert!(
            (d.eigenvalues[0].re - -0.7273).abs() < 5e-4,
            "{:?}",
            d.eigenvalues
        );
        assert!(
            (d.eigenvalues[1].re - -0.0053).abs() < 5e-4,
            "{:?}",
            d.eigenvalues
        );
        assert!(!d.amgm_holds);
        assert!(!d.k_psd);
        assert!(d.trace_identity_residual > 1e-3);
    }

    #[test]
    fn gamma_domain() {
        let inst = fixtures::counterexample();
        for g in [1.0, 1.5, -0.1, f64::NAN, 1.0 - 1e-13] {
            assert!(
                matches!(gamma_diagnostic(&inst, g, 1e-9), Err(Error::Domain { .. })),
                "{g}"
            );
        }
        assert!(gamma_diagnostic(&inst, 0.999, 1e-9).is_ok());
    }

    #[test]
    fn commuting_gamma_path_satisfies_amgm() {
        let inst = EpiInstance::new(
            fixtures::counterexample().sigma_x().clone(),
            SymMatrix::from_diagonal(&[200.0, 1.0]).unwrap(),
            SymMatrix::from_diagonal(&[0.25, 0.81]).unwrap(),
            1e-9,
        )
        .unwrap();
        let gammas: Vec<f64> = (0..20).map(|i| i as f64 * 0.05).collect();
        for d in gamma_path(&inst, &gammas, 1e-9).unwrap() {
            assert!(d.amgm_holds, "gamma {}", d.gamma);
            assert!(d
                .eigenvalues
                .iter()
                .all(|e| e.re >= -1e-12 && e.im.abs() < 1e-12));
            assert!(
                d.trace_identity_residual < 1e-12,
                "{}",
                d.trace_identity_residual
            );
        }
    }

    #[test]
    fn canonical_examples() {
        let sx = SymMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let inst = EpiInstance::new(
            sx.clone(),
            SymMatrix::from_diagonal(&[4.0, 9.0]).unwrap(),
            SymMatrix::identity(2).scale(0.5),
            1e-9,
        )
        .unwrap();
        let c = reduce_to_canonical(&inst, 1e-9).unwrap();
        assert!((c.scale - 6.0).abs() < 1e-12);
        let g0 = costa_check(&inst, 1e-9).unwrap();
        let g1 = costa_check(&c.instance, 1e-9).unwrap();
        assert!((g0.gap - c.scale * g1.gap).abs() <= 1e-8 * g0.scale());

        let already = EpiInstance::new(
            sx.clone(),
            SymMatrix::identity(2),
            SymMatrix::from_diagonal(&[0.3, 0.6]).unwrap(),
            1e-9,
        )
        .unwrap();
        let c = reduce_to_canonical(&already, 1e-9).unwrap();
        assert!((c.scale - 1.0).abs() < 1e-15);
        assert_eq!(c.instance.sigma_z(), &SymMatrix::identity(2));
        assert!(matrix::max_abs(&(c.instance.sigma_x().as_matrix() - sx.as_matrix())) < 1e-14);
    }

    #[test]
    fn canonical_rejects_non_commuting() {
        assert!(matches!(
            reduce_to_canonical(&fixtures::counterexample(), 1e-9),
            Err(Error::NotCommuting { .. })
        ));
    }
}
