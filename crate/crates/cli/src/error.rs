use ghost_imaging::montecarlo::MonteCarloError;
use ghost_imaging::{ImagingError, PropagationError, SourceError};
use thiserror::Error;

/// Failure classes, one per process exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Failure {
    #[error("config error: {0}")]
    Config(String),
    #[error("regime error: {0}")]
    Regime(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Config(_) => 2,
            Failure::Regime(_) => 3,
            Failure::Validation(_) => 4,
        }
    }

    pub fn io(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        Failure::Runtime(format!("{context}: {e}"))
    }
}

impl From<SourceError> for Failure {
    fn from(e: SourceError) -> Self {
        match e {
            SourceError::BrightnessTooHigh { .. } | SourceError::WidthMismatch { .. } => {
                Failure::Regime(format!("{e}; lower photon_flux or coherence_time"))
            }
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<PropagationError> for Failure {
    fn from(e: PropagationError) -> Self {
        match e {
            PropagationError::IntermediateRegime { .. } => Failure::Regime(e.to_string()),
            PropagationError::Source(s) => s.into(),
            PropagationError::Aliasing { .. } => {
                Failure::Config(format!("{e} (run.input_grid / run.grid samples)"))
            }
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<ImagingError> for Failure {
    fn from(e: ImagingError) -> Self {
        match e {
            ImagingError::Propagation(p) => p.into(),
            ImagingError::Source(s) => s.into(),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<MonteCarloError> for Failure {
    fn from(e: MonteCarloError) -> Self {
        match e {
            MonteCarloError::QuantumHasNoRealization => {
                Failure::Regime(format!("{e}; use mode=analytic or mode=numeric"))
            }
            MonteCarloError::Propagation(p) => p.into(),
            _ => Failure::Config(e.to_string()),
        }
    }
}
