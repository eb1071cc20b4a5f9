use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown dimension tag `{0}`")]
    UnknownDimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("equilibrium undefined: {0}")]
    EquilibriumUndefined(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("time {t} outside protocol domain [0, {t_f}]")]
    Domain { t: f64, t_f: f64 },

    #[error("integrator failed at t = {t}: {reason}")]
    Integrator { t: f64, reason: String },

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("ground state did not converge after {steps} steps (last energies {last_energies:?})")]
    GroundStateNotConverged { steps: usize, last_energies: Vec<f64> },

    #[error("equal masses make the separability constraint degenerate")]
    DegenerateConstraint,

    #[error("infeasible configuration: {0}")]
    InfeasibleConfiguration(String),

    #[error("inconsistent geometry: {0}")]
    InconsistentGeometry(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
