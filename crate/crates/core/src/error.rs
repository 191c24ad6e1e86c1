use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("viscosity must be positive and finite, got {0}")]
    InvalidViscosity(f64),
    #[error("viscosity {nu} outside the scaling range [{lo}, {hi}]")]
    ViscosityOutOfRange { nu: f64, lo: f64, hi: f64 },
    #[error("mesh needs at least 5 nodes, got {0}")]
    MeshTooSmall(usize),
    #[error("invalid solver setting: {0}")]
    InvalidSolverSetting(String),
    #[error("solver did not converge after {iterations} sweeps (residual {residual:e}, tolerance {tol:e})")]
    NonConvergence { iterations: usize, residual: f64, tol: f64 },
    #[error("solver diverged at sweep {iteration}: non-finite value at node {node}")]
    Divergence { iteration: usize, node: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid network layout: {0}")]
    InvalidLayout(String),
    #[error("non-finite gradient at parameter {index}")]
    NonFiniteGradient { index: usize },
    #[error("non-finite optimizer input at parameter {index}")]
    NonFiniteInput { index: usize },
    #[error("loss weight alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("{0}")]
    InvalidDataset(String),
    #[error("missing finite-difference solution for {0}")]
    MissingSolution(String),
    #[error("label lookup off mesh at x = {0}")]
    OffMesh(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint incompatible: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
