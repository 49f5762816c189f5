use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("zero-energy Jost solution needs a finite first moment of V")]
    ZeroEnergyUnsupported,
    #[error("no convergence: residual {residual:e} exceeds tolerance {tol:e}")]
    NoConvergence { residual: f64, tol: f64 },
    #[error("root isolation failed in bracket [{lo}, {hi}]")]
    RootIsolationFailure { lo: f64, hi: f64 },
    #[error("phase increment {jump} between adjacent nodes too large near k = {k}")]
    BranchAnchorTooLow { k: f64, jump: f64 },
    #[error("energy {0} is a jump point of the spectral shift function")]
    JumpPoint(f64),
    #[error("phase unwrap failed: adjacent jump {0} exceeds pi")]
    PhaseUnwrapFailure(f64),
    #[error("quadrature did not reach tolerance on [{a}, {b}]")]
    QuadratureFailure { a: f64, b: f64 },
    #[error("boundary pencil iA - kB is singular at k = {0}")]
    SingularPencil(String),
    #[error("suspected missed eigenvalue: gap {gap} between {lo} and {hi}")]
    MissedRootSuspected { lo: f64, hi: f64, gap: f64 },
    #[error("ODE step failure at x = {0}")]
    OdeStepFailure(f64),
    #[error("Fermi energy {0} coincides with a box eigenvalue")]
    NuOnEigenvalue(f64),
    #[error("spectrum holds {available} eigenvalues, {needed} needed")]
    InsufficientSpectrum { needed: usize, available: usize },
    #[error("eigenvalue {0} outside [-1, 1] beyond clamping tolerance")]
    EigenvalueOutOfRange(f64),
    #[error("shifted matrix cosh(s) + H0 is singular")]
    SingularShift,
    #[error("matrix is not positive definite (smallest eigenvalue {0})")]
    NotPositiveDefinite(f64),
    #[error("potential support [{lo}, {hi}] violates the required domain")]
    SupportViolation { lo: f64, hi: f64 },
    #[error("determinant factor {0:e} too close to zero")]
    SpectralCollision(f64),
    #[error("invalid boundary condition: {0}")]
    InvalidBoundaryCondition(String),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
