use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Local dimension must be an odd prime for the Wigner machinery.
    #[error("local dimension {0} is not an odd prime")]
    NotOddPrime(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("operator is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("not a density matrix: {0}")]
    InvalidDensity(String),

    #[error("region too large: {0}")]
    RegionTooLarge(String),

    #[error("MPS is not in canonical form (isometry residual {0:e})")]
    NotCanonical(f64),

    #[error("DMRG did not converge after {sweeps} sweeps (last energy change {delta:e})")]
    NotConverged { sweeps: usize, delta: f64 },

    /// A ground state is required but not cached and computing it was not allowed.
    #[error("ground state not cached; run `{0}` first")]
    MissingGroundState(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
