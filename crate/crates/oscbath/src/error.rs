use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("truncation too small: thermal tail {tail:e} exceeds {tol:e}")]
    TruncationTooSmall { tail: f64, tol: f64 },
    #[error("quadrature failed to reach tolerance (estimate {estimate:e}, error {error:e})")]
    QuadratureFailure { estimate: f64, error: f64 },
    #[error("frequency {0} is outside the interior of the coupling domain")]
    DomainError(f64),
    #[error("time step {dt} exceeds the stability bound {bound}")]
    UnstableStep { dt: f64, bound: f64 },
    #[error("time step {dt} too large for the generator norm bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("null space has dimension {0} (counted up to 3), expected 1")]
    DegenerateNullSpace(usize),
    #[error("null vector is not positive semidefinite (min eigenvalue {0:e})")]
    NoPSDNullVector(f64),
    #[error("reference state is singular (min eigenvalue {0:e})")]
    SingularReference(f64),
    #[error("hamiltonian is not diagonal in the working basis")]
    NonDiagonalHamiltonian,
    #[error("grid under-resolved: {0}")]
    GridUnderResolved(String),
    #[error("kernel factor destroys decay of the characteristic function (edge/peak {0:e})")]
    KernelDivergence(f64),
    #[error("kernel is not quadratic")]
    NonQuadraticKernel,
    #[error("missing bath quantity: {0}")]
    MissingBathQuantity(&'static str),
    #[error("time step {dt} violates the CFL bound {bound}")]
    CFLViolation { dt: f64, bound: f64 },
    #[error("mass leaked through the boundary: {0:e}")]
    BoundaryLeak(f64),
    #[error("drift matrix is not Hurwitz; no stationary covariance")]
    NonHurwitzDrift,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
