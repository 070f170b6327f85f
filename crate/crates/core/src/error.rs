use thiserror::Error;

/// Errors raised by the reduced-dynamics toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RdlError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not unitary: max |U^dag U - I| = {deviation:e}")]
    Unitarity { deviation: f64 },

    #[error("matrix is not Hermitian: max |A - A^dag| = {deviation:e}")]
    Hermiticity { deviation: f64 },

    #[error("not a density matrix: {reason} (minimum eigenvalue {min_eigenvalue:e})")]
    NotAState { min_eigenvalue: f64, reason: String },

    #[error("operator is not in the reduced span V_S: residual {residual:e} > {tolerance:e}")]
    NotInVS { residual: f64, tolerance: f64 },

    #[error("state family is empty: {0}")]
    EmptyFamily(String),

    #[error("linear system is singular or ill-conditioned (condition number {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("no positivity-preserving equal-marginal pair could be sampled after {trials} trials")]
    SamplingExhausted { trials: usize },

    #[error(
        "map is only defined on a {domain_dim}-dimensional subspace of the {full_dim}-dimensional operator space"
    )]
    IncompleteDomain { domain_dim: usize, full_dim: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, RdlError>;
