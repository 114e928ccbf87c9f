use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what}: entry is not finite")]
    NonFinite { what: &'static str },

    #[error("{what}: empty matrix")]
    Empty { what: &'static str },

    #[error(
        "symmetric eigensolver did not converge on {n}x{n} matrix after {sweeps} sweeps \
         (off-diagonal norm {off_diagonal:e})"
    )]
    NoConvergence {
        n: usize,
        sweeps: usize,
        off_diagonal: f64,
    },

    #[error("{what} is not positive semidefinite: eigenvalue {eigenvalue:e} below {threshold:e}")]
    NotPsd {
        what: &'static str,
        eigenvalue: f64,
        threshold: f64,
    },

    #[error("{what}: A is not below I in the Loewner order (I - A has eigenvalue {eigenvalue:e})")]
    NotBelowIdentity { what: &'static str, eigenvalue: f64 },

    #[error("{what} is singular or not positive definite")]
    Singular { what: &'static str },

    #[error(
        "matrices do not commute (commutator {commutator:e} > {threshold:e}); \
         use the general evaluator instead"
    )]
    NotCommuting { commutator: f64, threshold: f64 },

    #[error(
        "simultaneous diagonalization left off-diagonal residual {residual:e} > {threshold:e}"
    )]
    NotDiagonalized { residual: f64, threshold: f64 },

    #[error("{what} = {value} is outside its domain: {reason}")]
    Domain {
        what: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("commuting-case inequality violated (gap {gap:e}, scale {scale:e}); this is a numerical bug")]
    CommutingCaseViolated { gap: f64, scale: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),

    #[error("invalid mixture: {0}")]
    InvalidMixture(&'static str),

    #[error("need more samples than neighbours: m = {m}, k = {k}")]
    TooFewSamples { m: usize, k: usize },
}
