//! Seeded generators for random matrices and instances.
//!
//! Every stream is a ChaCha20 generator keyed by a 64-bit seed and a stream
//! index, so independent work items (search restarts, sample sets) get
//! reproducible, non-overlapping randomness regardless of execution order.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::epi::EpiInstance;
use crate::math;
use crate::matrix::{Matrix, SymMatrix};
use crate::DEFAULT_TOL;

pub type StreamRng = ChaCha20Rng;

pub fn seeded_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    math::exp(math::ln(lo) + u * (math::ln(hi) - math::ln(lo)))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`).
pub fn haar_orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let g = Matrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// `U diag(values) U^T`.
pub fn with_spectrum(basis: &Matrix, values: &[f64]) -> SymMatrix {
    SymMatrix::from_diagonal(values)
        .expect("finite spectrum")
        .congruence(basis)
}

/// Positive definite matrix with a Haar eigenbasis and eigenvalues
/// log-uniform in `[lo, hi]`.
pub fn random_pd<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> SymMatrix {
    let u = haar_orthogonal(rng, n);
    let values: Vec<f64> = (0..n).map(|_| log_uniform(rng, lo, hi)).collect();
    with_spectrum(&u, &values)
}

/// Instance with `A` and `Sigma_Z` sharing a random eigenbasis; `A`'s
/// eigenvalues are uniform on `[0, 1]`.
pub fn random_commuting_instance<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    lo: f64,
    hi: f64,
) -> EpiInstance {
    let sigma_x = random_pd(rng, n, lo, hi);
    let u = haar_orthogonal(rng, n);
    let z: Vec<f64> = (0..n).map(|_| log_uniform(rng, lo, hi)).collect();
    let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    EpiInstance::new(
        sigma_x,
        with_spectrum(&u, &z),
        with_spectrum(&u, &a),
        DEFAULT_TOL,
    )
    .expect("random commuting instance is feasible")
}

/// Instance with independent eigenbases for all three matrices; `A`'s
/// eigenvalues are uniform on `[a_lo, a_hi]`.
pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    lo: f64,
    hi: f64,
    a_lo: f64,
    a_hi: f64,
) -> EpiInstance {
    let sigma_x = random_pd(rng, n, lo, hi);
    let sigma_z = random_pd(rng, n, lo, hi);
    let v = haar_orthogonal(rng, n);
    let a: Vec<f64> = (0..n)
        .map(|_| a_lo + (a_hi - a_lo) * rng.random::<f64>())
        .collect();
    EpiInstance::new(sigma_x, sigma_z, with_spectrum(&v, &a), DEFAULT_TOL)
        .expect("random instance is feasible")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{max_abs, sym_eig};

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = seeded_rng(7, 0).random();
        let b: u64 = seeded_rng(7, 0).random();
        let c: u64 = seeded_rng(7, 1).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn haar_is_orthogonal() {
        let mut rng = seeded_rng(1, 0);
        for n in 1..7 {
            let q = haar_orthogonal(&mut rng, n);
            let err = max_abs(&(q.transpose() * &q - Matrix::identity(n, n)));
            assert!(err < 1e-13);
        }
    }

    #[test]
    fn random_pd_spectrum_in_range() {
        let mut rng = seeded_rng(3, 0);
        for _ in 0..50 {
            let m = random_pd(&mut rng, 4, 0.5, 20.0);
            let eig = sym_eig(&m).unwrap();
            assert!(eig.min() > 0.5 * (1.0 - 1e-12) && eig.max() < 20.0 * (1.0 + 1e-12));
        }
    }
}
