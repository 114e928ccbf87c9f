use epi_core::matrix::{
    commutes, is_psd, loewner_leq, max_abs_of, psd_sqrt, simultaneous_diagonalize, sym_eig, Matrix,
};
use epi_core::random::{haar_orthogonal, random_pd, seeded_rng, with_spectrum};
use epi_core::SymMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn rel_frobenius(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn random_symmetric(seed: u64, n: usize) -> SymMatrix {
    let mut rng = seeded_rng(seed, 0);
    let m = Matrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal) * 10.0);
    SymMatrix::new(m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn eig_reconstructs_and_is_orthogonal(seed in any::<u64>(), n in 1usize..=8) {
        let m = random_symmetric(seed, n);
        let eig = sym_eig(&m).unwrap();
        prop_assert!(rel_frobenius(eig.reconstruct().as_matrix(), m.as_matrix()) <= 1e-9);
        let gram = eig.basis.transpose() * &eig.basis;
        prop_assert!(max_abs_of(&(gram - Matrix::identity(n, n))) <= 1e-10);
        prop_assert!(eig.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn sqrt_squares_back(seed in any::<u64>(), n in 1usize..=8, rank_drop in 0usize..3) {
        let mut rng = seeded_rng(seed, 1);
        let u = haar_orthogonal(&mut rng, n);
        let mut values: Vec<f64> = (0..n).map(|_| epi_core::random::log_uniform(&mut rng, 1e-3, 1e3)).collect();
        for v in values.iter_mut().take(rank_drop.min(n.saturating_sub(1))) {
            *v = 0.0;
        }
        let m = with_spectrum(&u, &values);
        let r = psd_sqrt(&m, 1e-10).unwrap();
        prop_assert!(rel_frobenius(&(r.as_matrix() * r.as_matrix()), m.as_matrix()) <= 1e-9);
        prop_assert!(is_psd(&r, 1e-9));
    }

    #[test]
    fn commuting_pairs_diagonalize_together(seed in any::<u64>(), n in 1usize..=6, repeat in any::<bool>()) {
        let mut rng = seeded_rng(seed, 2);
        let u = haar_orthogonal(&mut rng, n);
        let mut a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        if repeat && n > 1 {
            a[1] = a[0];
        }
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 5.0).collect();
        let (ma, mb) = (with_spectrum(&u, &a), with_spectrum(&u, &b));
        prop_assert!(commutes(&ma, &mb, 1e-9).unwrap());
        let sd = simultaneous_diagonalize(&ma, &mb, 1e-9).unwrap();
        prop_assert!(sd.residual <= 1e-9);
        let ra = sd.basis.transpose() * ma.as_matrix() * &sd.basis;
        for i in 0..n {
            prop_assert!((ra[(i, i)] - sd.a[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn non_commuting_pairs_refuse_diagonalization(seed in any::<u64>(), n in 2usize..=6) {
        let mut rng = seeded_rng(seed, 3);
        let a = random_pd(&mut rng, n, 0.1, 10.0);
        let b = random_pd(&mut rng, n, 0.1, 10.0);
        prop_assume!(!commutes(&a, &b, 1e-9).unwrap());
        prop_assert!(simultaneous_diagonalize(&a, &b, 1e-9).is_err());
    }

    #[test]
    fn loewner_antisymmetry(seed in any::<u64>(), n in 1usize..=5, eps in 0.0f64..1e-11) {
        let mut rng = seeded_rng(seed, 4);
        let a = random_pd(&mut rng, n, 0.1, 10.0);
        let b = a.try_add(&SymMatrix::identity(n).scale(eps)).unwrap();
        let tol = 1e-9;
        if loewner_leq(&a, &b, tol).unwrap() && loewner_leq(&b, &a, tol).unwrap() {
            let combined = 2.0 * tol * (n as f64).sqrt() * a.frobenius_norm().max(b.frobenius_norm()).max(1.0);
            prop_assert!(b.try_sub(&a).unwrap().frobenius_norm() <= combined);
        }
        let bigger = a.try_add(&SymMatrix::identity(n)).unwrap();
        prop_assert!(loewner_leq(&a, &bigger, tol).unwrap());
        prop_assert!(!loewner_leq(&bigger, &a, tol).unwrap());
    }
}
