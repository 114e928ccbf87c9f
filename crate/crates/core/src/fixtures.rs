//! Built-in instances.

use crate::epi::EpiInstance;
use crate::matrix::SymMatrix;
use crate::DEFAULT_TOL;

/// `Sigma_X = [[200, 100], [100, 51]]`.
pub fn counterexample_sigma_x() -> SymMatrix {
    SymMatrix::from_row_slice(2, &[200.0, 100.0, 100.0, 51.0]).expect("fixture")
}

/// `Sigma_Z = diag(200, 1)`.
pub fn counterexample_sigma_z() -> SymMatrix {
    SymMatrix::from_diagonal(&[200.0, 1.0]).expect("fixture")
}

/// `A^{1/2} = [[10, 5], [5, 17]] / 20`.
pub fn counterexample_a_sqrt() -> SymMatrix {
    SymMatrix::from_row_slice(2, &[0.5, 0.25, 0.25, 0.85]).expect("fixture")
}

/// Non-commuting 2x2 instance that violates the generalized inequality by a
/// wide margin: `N(X + A^{1/2} Z) / 2 pi e ~ 19.53` against a right-hand
/// side of `~ 40.28`.
pub fn counterexample() -> EpiInstance {
    EpiInstance::from_a_sqrt(
        counterexample_sigma_x(),
        counterexample_sigma_z(),
        &counterexample_a_sqrt(),
        DEFAULT_TOL,
    )
    .expect("fixture is feasible")
}
