use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("dyadic band out of range: {0}")]
    BandOutOfRange(String),
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("multiplier undefined at grid frequency {0:?}")]
    SingularMultiplier(Vec<f64>),
    #[error("adaptive quadrature did not converge: {0}")]
    QuadratureFailure(String),
    #[error("root finding did not converge: {0}")]
    ConvergenceFailure(String),
    #[error("trajectory has no samples")]
    EmptyTrajectory,
    #[error("trajectory frame is missing component `{0}`")]
    MissingComponent(&'static str),
    #[error("vacuum reached: min(1+q) = {min_density:e} at t = {t}")]
    VacuumError { min_density: f64, t: f64 },
    #[error("blow-up: sup-norm {norm:e} exceeds threshold at t = {t}")]
    BlowUp { norm: f64, t: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
