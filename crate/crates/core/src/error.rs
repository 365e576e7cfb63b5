use alloc::string::String;
use alloc::vec::Vec;

use crate::conic::SolveStatus;
use crate::network::Violation;

/// Errors raised by the pricing toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("eigensolver did not converge")]
    EigenNoConvergence,

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid case: {} violation(s)", .0.len())]
    InvalidCase(Vec<Violation>),

    #[error("operation requires a radial network")]
    NonRadial,

    #[error("branch-flow model requires zero shunt admittance (bus {bus})")]
    NonzeroShunt { bus: usize },

    #[error("malformed cone program: {0}")]
    MalformedProgram(String),

    #[error("quadratic objective is not positive semidefinite (eigenvalue {eigenvalue:.3e})")]
    NonConvexQuadratic { eigenvalue: f64 },

    #[error("KKT system numerically singular at iteration {iteration}")]
    SingularKkt { iteration: usize },

    #[error("solver did not reach optimality: {status:?}")]
    NotOptimal { status: SolveStatus },

    #[error("AC solution not certified (KKT residual {residual:.3e})")]
    Uncertified { residual: f64 },

    #[error("re-solve moved to a different local optimum (dispatch distance {distance:.3e})")]
    BasinJump { distance: f64 },

    #[error("dual certificate check failed: {0}")]
    CertificateMismatch(String),

    #[error("dual multipliers are infeasible: {0}")]
    DualInfeasible(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
