//! Seeded counterexample search.
//!
//! Instances are mapped to unconstrained parameter vectors so that every
//! point the optimizer visits is feasible:
//!
//! - `Sigma_X`, `Sigma_Z` through lower-triangular Cholesky factors with
//!   log-parameterized diagonals (always PD);
//! - `A = Q diag(logistic(theta)) Q^T` with `Q` the Cayley transform of a
//!   skew-symmetric matrix (always `0 < A < I`).
//!
//! The [`Encoding::Commuting`] variant restricts `A` and `Sigma_Z` to be
//! diagonal, which by the canonical reduction covers every commuting pair.
//!
//! Each restart is a Nelder–Mead run from a random instance drawn from its
//! own generator stream `(seed, restart index)`, so restarts may run in any
//! order or in parallel; [`select_best`] reduces them deterministically.

mod simplex;

use alloc::vec::Vec;

use rand::Rng;

use crate::epi::{self, EpiInstance, EpiReport};
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::{self, Matrix, SymMatrix};
use crate::random::{self, seeded_rng};
use crate::DEFAULT_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    /// Unrestricted `(Sigma_X, Sigma_Z, A)`.
    General,
    /// Diagonal `A` and `Sigma_Z`.
    Commuting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub n: usize,
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Edge length of the initial simplex in parameter space.
    pub step_scale: f64,
    /// Eigenvalue range `(lo, hi)` for the initial covariance draws.
    pub eig_range: (f64, f64),
    /// An instance counts as a violation when its re-evaluated gap is below
    /// `-objective_tol * max(lhs, rhs)`.
    pub objective_tol: f64,
    pub encoding: Encoding,
}

impl SearchConfig {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            restarts: 32,
            iterations: 2000,
            seed: 42,
            step_scale: 0.5,
            eig_range: (1e-2, 1e3),
            objective_tol: 1e-6,
            encoding: Encoding::General,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.eig_range;
        if self.n == 0 {
            Err(Error::InvalidConfig("n must be at least 1"))
        } else if self.restarts == 0 {
            Err(Error::InvalidConfig("restarts must be at least 1"))
        } else if self.iterations == 0 {
            Err(Error::InvalidConfig("iterations must be at least 1"))
        } else if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            Err(Error::InvalidConfig(
                "eigenvalue range must satisfy 0 < lo < hi < inf",
            ))
        } else if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            Err(Error::InvalidConfig("step scale must be positive"))
        } else if !(self.objective_tol >= 0.0) {
            Err(Error::InvalidConfig(
                "objective tolerance must be non-negative",
            ))
        } else {
            Ok(())
        }
    }
}

fn tri_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Length of the parameter vector for dimension `n`.
pub fn param_len(n: usize, encoding: Encoding) -> usize {
    match encoding {
        Encoding::General => 2 * tri_len(n) + n * (n - 1) / 2 + n,
        Encoding::Commuting => tri_len(n) + 2 * n,
    }
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + math::exp(-t))
    } else {
        let e = math::exp(t);
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    math::ln(p) - math::ln(1.0 - p)
}

fn decode_cholesky(p: &[f64], n: usize) -> SymMatrix {
    let mut l = Matrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in 0..=i {
            l[(i, j)] = if i == j { math::exp(p[k]) } else { p[k] };
            k += 1;
        }
    }
    SymMatrix::from_symmetric_product(&l * l.transpose())
}

fn encode_cholesky(m: &SymMatrix, out: &mut Vec<f64>, what: &'static str) -> Result<()> {
    let chol = m
        .as_matrix()
        .clone()
        .cholesky()
        .ok_or(Error::Singular { what })?;
    let l = chol.l();
    for i in 0..m.n() {
        for j in 0..=i {
            out.push(if i == j {
                math::ln(l[(i, j)])
            } else {
                l[(i, j)]
            });
        }
    }
    Ok(())
}

fn cayley(p: &[f64], n: usize) -> Result<Matrix> {
    let mut s = Matrix::zeros(n, n);
    let mut k = 0;
    for i in 1..n {
        for j in 0..i {
            s[(i, j)] = p[k];
            s[(j, i)] = -p[k];
            k += 1;
        }
    }
    let id = Matrix::identity(n, n);
    (&id - &s).lu().solve(&(&id + &s)).ok_or(Error::Singular {
        what: "I - S in Cayley transform",
    })
}

/// Skew parameters of an orthogonal `Q` with `det Q = 1` and no eigenvalue
/// at `-1`.
fn inverse_cayley(q: &Matrix, out: &mut Vec<f64>) -> Result<()> {
    let n = q.nrows();
    let id = Matrix::identity(n, n);
    // S = (Q - I)(Q + I)^{-1}  <=>  (Q + I)^T S^T = (Q - I)^T
    let st = (q + &id)
        .transpose()
        .lu()
        .solve(&(q - &id).transpose())
        .ok_or(Error::Singular {
            what: "Q + I in Cayley transform",
        })?;
    let s = st.transpose();
    for i in 1..n {
        for j in 0..i {
            out.push(0.5 * (s[(i, j)] - s[(j, i)]));
        }
    }
    Ok(())
}

/// Flips eigenvector signs so that `det = +1` and `Q + I` is as well
/// conditioned as possible.
fn orient_basis(basis: &Matrix) -> Result<Matrix> {
    let n = basis.nrows();
    let id = Matrix::identity(n, n);
    let det_sign = basis.determinant().signum();
    let mut best: Option<(f64, Matrix)> = None;
    let masks: u64 = if n <= 12 { 1 << n } else { 2 };
    for mask in 0..masks {
        let flips = mask.count_ones() as usize;
        let sign = if flips % 2 == 0 { det_sign } else { -det_sign };
        if sign < 0.0 {
            continue;
        }
        let mut q = basis.clone();
        for j in 0..n {
            if mask & (1 << j) != 0 {
                for i in 0..n {
                    q[(i, j)] = -q[(i, j)];
                }
            }
        }
        let shifted = &q + &id;
        let gram = SymMatrix::from_symmetric_product(shifted.transpose() * &shifted);
        let conditioning = matrix::sym_eig(&gram)?.min();
        if best.as_ref().map_or(true, |(c, _)| conditioning > *c) {
            best = Some((conditioning, q));
        }
    }
    match best {
        Some((c, q)) if c > 1e-12 => Ok(q),
        _ => Err(Error::Singular {
            what: "Q + I in Cayley transform",
        }),
    }
}

/// Inverse of [`decode`]. `A`'s eigenvalues must lie strictly inside `(0, 1)`.
pub fn encode(inst: &EpiInstance, encoding: Encoding) -> Result<Vec<f64>> {
    let n = inst.n();
    let mut out = Vec::with_capacity(param_len(n, encoding));
    encode_cholesky(inst.sigma_x(), &mut out, "sigma_x")?;
    let logits = |values: &[f64]| -> Result<Vec<f64>> {
        values
            .iter()
            .map(|&v| {
                if v > 0.0 && v < 1.0 {
                    Ok(logit(v))
                } else {
                    Err(Error::Domain {
                        what: "eigenvalue of a",
                        value: v,
                        reason: "the encoding covers only the open interval (0, 1)",
                    })
                }
            })
            .collect()
    };
    match encoding {
        Encoding::General => {
            encode_cholesky(inst.sigma_z(), &mut out, "sigma_z")?;
            let eig = matrix::sym_eig(inst.a())?;
            let q = orient_basis(&eig.basis)?;
            inverse_cayley(&q, &mut out)?;
            out.extend(logits(&eig.eigenvalues)?);
        }
        Encoding::Commuting => {
            if !inst.a().is_diagonal() || !inst.sigma_z().is_diagonal() {
                return Err(Error::Domain {
                    what: "off-diagonal entry",
                    value: f64::NAN,
                    reason: "the commuting encoding needs diagonal a and sigma_z",
                });
            }
            for z in inst.sigma_z().diagonal() {
                if !(z > 0.0) {
                    return Err(Error::Singular { what: "sigma_z" });
                }
                out.push(math::ln(z));
            }
            out.extend(logits(&inst.a().diagonal())?);
        }
    }
    Ok(out)
}

/// Maps any finite parameter vector of length [`param_len`] to a feasible
/// instance.
pub fn decode(params: &[f64], n: usize, encoding: Encoding) -> Result<EpiInstance> {
    let expected = param_len(n, encoding);
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1"));
    }
    if params.len() != expected {
        return Err(Error::DimensionMismatch {
            what: "parameter vector",
            expected,
            found: params.len(),
        });
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite {
            what: "parameter vector",
        });
    }
    let t = tri_len(n);
    let sigma_x = decode_cholesky(&params[..t], n);
    let (sigma_z, a) = match encoding {
        Encoding::General => {
            let sigma_z = decode_cholesky(&params[t..2 * t], n);
            let skew = n * (n - 1) / 2;
            let q = cayley(&params[2 * t..2 * t + skew], n)?;
            let values: Vec<f64> = params[2 * t + skew..]
                .iter()
                .map(|&p| logistic(p))
                .collect();
            (sigma_z, random::with_spectrum(&q, &values))
        }
        Encoding::Commuting => {
            let z: Vec<f64> = params[t..t + n].iter().map(|&p| math::exp(p)).collect();
            let a: Vec<f64> = params[t + n..].iter().map(|&p| logistic(p)).collect();
            (SymMatrix::from_diagonal(&z)?, SymMatrix::from_diagonal(&a)?)
        }
    };
    if sigma_x
        .as_matrix()
        .iter()
        .chain(sigma_z.as_matrix().iter())
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite {
            what: "decoded covariance",
        });
    }
    EpiInstance::new(sigma_x, sigma_z, a, DEFAULT_TOL)
}

/// `rhs - lhs` of the inequality at the decoded instance (positive means a
/// violation); `-inf` when the point cannot be evaluated or a covariance is
/// conditioned worse than [`MAX_CONDITION`].
pub fn objective(params: &[f64], n: usize, encoding: Encoding) -> f64 {
    evaluate(params, n, encoding).map_or(f64::NEG_INFINITY, |r| -r.gap)
}

/// `(rhs - lhs) / max(lhs, rhs)`, in `[-1, 1]`; `-inf` when the point cannot
/// be evaluated. This is what the search maximizes: it is invariant to the
/// overall covariance scale, which `rhs - lhs` is not.
pub fn relative_objective(params: &[f64], n: usize, encoding: Encoding) -> f64 {
    evaluate(params, n, encoding).map_or(f64::NEG_INFINITY, |r| -r.relative_gap())
}

/// Points whose covariances are conditioned worse than this are rejected:
/// their log-determinants are no longer trustworthy to the precision the
/// violation certificate needs.
pub const MAX_CONDITION: f64 = 1e10;

fn evaluate(params: &[f64], n: usize, encoding: Encoding) -> Result<EpiReport> {
    let inst = decode(params, n, encoding)?;
    for (what, m) in [("sigma_x", inst.sigma_x()), ("sigma_z", inst.sigma_z())] {
        let eig = matrix::sym_eig(m)?;
        if !(eig.min() > 0.0 && eig.max() <= MAX_CONDITION * eig.min()) {
            return Err(Error::Singular { what });
        }
    }
    epi::costa_check(&inst, DEFAULT_TOL)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub index: usize,
    pub initial_params: Vec<f64>,
    pub best_params: Vec<f64>,
    /// Best [`relative_objective`] reached.
    pub best_objective: f64,
    /// `(iteration, best relative objective so far)`; non-decreasing.
    pub history: Vec<(usize, f64)>,
    pub evaluations: usize,
    pub iterations: usize,
}

fn initial_instance<R: Rng + ?Sized>(rng: &mut R, cfg: &SearchConfig) -> EpiInstance {
    let n = cfg.n;
    let (lo, hi) = cfg.eig_range;
    let a_draw = |rng: &mut R| 0.02 + 0.96 * rng.random::<f64>();
    match cfg.encoding {
        Encoding::General => random::random_instance(rng, n, lo, hi, 0.02, 0.98),
        Encoding::Commuting => {
            let sigma_x = random::random_pd(rng, n, lo, hi);
            let z: Vec<f64> = (0..n).map(|_| random::log_uniform(rng, lo, hi)).collect();
            let a: Vec<f64> = (0..n).map(|_| a_draw(rng)).collect();
            EpiInstance::new(
                sigma_x,
                SymMatrix::from_diagonal(&z).expect("finite"),
                SymMatrix::from_diagonal(&a).expect("finite"),
                DEFAULT_TOL,
            )
            .expect("diagonal draw is feasible")
        }
    }
}

/// One Nelder–Mead descent, fully determined by `(cfg.seed, index)`.
pub fn run_restart(cfg: &SearchConfig, index: usize) -> Result<RestartOutcome> {
    cfg.validate()?;
    let mut rng = seeded_rng(cfg.seed, index as u64);
    let mut attempts = 0;
    let start = loop {
        let inst = initial_instance(&mut rng, cfg);
        match encode(&inst, cfg.encoding) {
            Ok(p) => break p,
            Err(e) if attempts >= 16 => return Err(e),
            Err(_) => attempts += 1,
        }
    };
    let (n, enc) = (cfg.n, cfg.encoding);
    let m = simplex::minimize(
        |p| -relative_objective(p, n, enc),
        &start,
        cfg.step_scale,
        cfg.iterations,
    );
    Ok(RestartOutcome {
        index,
        initial_params: start,
        best_params: m.x,
        best_objective: -m.value,
        history: m.history.into_iter().map(|(i, v)| (i, -v)).collect(),
        evaluations: m.evaluations,
        iterations: m.iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchTrace {
    pub best_instance: EpiInstance,
    /// Fresh [`epi::costa_check`] of `best_instance`.
    pub best_report: EpiReport,
    pub best_gap: f64,
    /// The re-evaluated gap is below `-objective_tol * max(lhs, rhs)`.
    pub found: bool,
    /// Index of the winning restart.
    pub best_restart: usize,
    pub restarts: Vec<RestartOutcome>,
    pub total_evaluations: usize,
    pub seed: u64,
}

/// Deterministic reduction: highest objective wins, lowest restart index on
/// ties. The winner is re-evaluated from scratch.
pub fn select_best(cfg: &SearchConfig, mut restarts: Vec<RestartOutcome>) -> Result<SearchTrace> {
    if restarts.is_empty() {
        return Err(Error::InvalidConfig("no restarts to reduce"));
    }
    restarts.sort_by_key(|r| r.index);
    let mut winner = 0;
    for (i, r) in restarts.iter().enumerate() {
        if r.best_objective > restarts[winner].best_objective {
            winner = i;
        }
    }
    let best = &restarts[winner];
    let best_instance = decode(&best.best_params, cfg.n, cfg.encoding)?;
    let best_report = epi::costa_check(&best_instance, DEFAULT_TOL)?;
    let found = best_report.gap < -cfg.objective_tol * best_report.scale();
    Ok(SearchTrace {
        best_gap: best_report.gap,
        found,
        best_restart: best.index,
        total_evaluations: restarts.iter().map(|r| r.evaluations).sum(),
        seed: cfg.seed,
        best_instance,
        best_report,
        restarts,
    })
}

/// Runs every restart serially and reduces them.
pub fn search_counterexample(cfg: &SearchConfig) -> Result<SearchTrace> {
    cfg.validate()?;
    let outcomes = (0..cfg.restarts)
        .map(|i| run_restart(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    select_best(cfg, outcomes)
}
