use thiserror::Error;

/// Errors surfaced by model construction, evaluation, solvers, and simulation.
#[derive(Debug, Error)]
pub enum EzError {
    #[error("invalid preference parameters: {0}")]
    InvalidPreferences(String),

    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("state {x} outside the model domain ({lo}, {hi})")]
    OutsideDomain { x: f64, lo: f64, hi: f64 },

    #[error("invalid consumption stream: {0}")]
    InvalidStream(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("solver failure at time step {step} (t = {t}): {message}")]
    SolverFailure { step: usize, t: f64, message: String },

    #[error("simulation failure: {0}")]
    SimulationFailure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EzError>;
