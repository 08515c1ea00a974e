use thiserror::Error;

#[derive(Debug, Error)]
pub enum DsmError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    /// `‖f_δ‖ ≤ cδ`: the data carries no signal above the noise level and the
    /// zero reconstruction is the only defensible answer.
    #[error("noise dominates data: ‖f_δ‖ = {data_norm:e} ≤ cδ = {level:e}; return u = 0")]
    NoiseDominates { data_norm: f64, level: f64 },

    #[error("inconsistent data: ‖Pf_δ‖ = {null_norm:e} ≥ cδ = {level:e}")]
    InconsistentData { null_norm: f64, level: f64 },

    #[error("initial discrepancy h(0) = {h0:e} does not exceed cδ = {level:e}; increase c0 so that a(0) ≥ σ₁²")]
    InitialDiscrepancy { h0: f64, level: f64 },

    #[error("no discrepancy crossing before t_max = {t_max:e}")]
    HorizonExceeded { t_max: f64 },

    #[error("accuracy not reached: {0}")]
    Accuracy(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl DsmError {
    /// True for failures of a solver precondition on the data (as opposed to
    /// malformed configuration or I/O).
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            DsmError::NoiseDominates { .. }
                | DsmError::InconsistentData { .. }
                | DsmError::InitialDiscrepancy { .. }
                | DsmError::HorizonExceeded { .. }
                | DsmError::NoSolution(_)
                | DsmError::Accuracy(_)
        )
    }

    /// Short machine-readable code used in report rows.
    pub fn code(&self) -> &'static str {
        match self {
            DsmError::InvalidInput(_) => "invalid_input",
            DsmError::Domain(_) => "domain",
            DsmError::NoSolution(_) => "no_solution",
            DsmError::NoiseDominates { .. } => "noise_dominates",
            DsmError::InconsistentData { .. } => "inconsistent_data",
            DsmError::InitialDiscrepancy { .. } => "initial_discrepancy",
            DsmError::HorizonExceeded { .. } => "horizon_exceeded",
            DsmError::Accuracy(_) => "accuracy",
            DsmError::Config(_) => "config",
            DsmError::Io(_) => "io",
            DsmError::Parse(_) => "parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, DsmError>;
