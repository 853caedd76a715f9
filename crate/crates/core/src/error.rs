use thiserror::Error;

/// Errors raised by the solvers and constructors in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("bad bounds: {0}")]
    BadBounds(String),
    #[error("bad size: {0}")]
    BadSize(String),
    #[error("gauge factor not resolvable: hbar*pi/dx = {k_max:.6} < max|p| = {p_max:.6}")]
    NonResolvableGauge { k_max: f64, p_max: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("point ({x}, {p}) is outside the grid")]
    OutOfDomain { x: f64, p: f64 },
    #[error("spatial dimension {0} is not supported (only n = 1)")]
    UnsupportedDimension(usize),
    #[error("operation requires a separable Hamiltonian")]
    UnsupportedHamiltonian,
    #[error("step too large: dt = {dt}, bound = {bound}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("CFL violation: dt * max|dH/dp| = {shift} exceeds {limit}")]
    CflViolation { shift: f64, limit: f64 },
    #[error("chi kernel degenerate (a = {a}, b = {b})")]
    DegenerateKernel { a: f64, b: f64 },
    #[error("field does not decay at the momentum boundary (edge/max = {ratio:e})")]
    BoundaryDecay { ratio: f64 },
    #[error("coordinate domain too narrow: {width} < {required} (12 kernel standard deviations)")]
    DomainTooNarrow { width: f64, required: f64 },
    #[error("eigenvalues not converged under grid doubling: shift {shift:e}")]
    ConvergenceFailure { shift: f64 },
    #[error("grid too large for dense quadrature: {0} > 128 points")]
    GridTooLarge(usize),
    #[error("Monte Carlo variance explosion: effective sample size {ess:.2} < 10 in bin ({ix}, {ip})")]
    VarianceExplosion { ess: f64, ix: usize, ip: usize },
    #[error("io: {0}")]
    Io(String),
    #[error("format: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
