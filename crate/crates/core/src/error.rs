use thiserror::Error;

#[derive(Debug, Error)]
pub enum RageError {
    #[error("site index {site} out of range for chain of {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("duplicate site {0} in support")]
    DuplicateSite(usize),
    #[error("support of size {got} exceeds maximum {max}")]
    SupportTooLarge { got: usize, max: usize },
    #[error("site {0} lies inside the support")]
    SiteInSupport(usize),
    #[error("site {0} not in the support")]
    SiteNotInSupport(usize),
    #[error("chain length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("boundary condition mismatch")]
    BoundaryMismatch,
    #[error("mismatched supports between bra and ket assignments")]
    SupportMismatch,
    #[error("equal site indices j = k = {0}")]
    EqualSites(usize),
    #[error("norm matrix is numerically zero")]
    DegenerateNorm,
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("rotation at site {0} is not unitary")]
    NonUnitaryRotation(usize),
    #[error("tensor at site {site} has shape {got_rows}x{got_cols}, expected {want_rows}x{want_cols}")]
    BadTensorShape {
        site: usize,
        got_rows: usize,
        got_cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("non-finite entry at site {0}")]
    NonFiniteEntry(usize),
    #[error("dense oracle supports at most {cap} qubits, got {n}")]
    OracleCap { n: usize, cap: usize },
    #[error("operator sum is not Hermitian (deviation {0:.3e})")]
    NonHermitianHamiltonian(f64),
    #[error("invalid lattice map: {0}")]
    BadLatticeMap(String),
    #[error("eigensolver failed to converge (residual {0:.3e})")]
    EigenNoConvergence(f64),
    #[error("linear algebra backend error: {0}")]
    Backend(String),
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("operation requires identity rotations (site {0} differs)")]
    RotationsNotIdentity(usize),
}

impl From<ndarray_linalg::error::LinalgError> for RageError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        RageError::Backend(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, RageError>;
