use pvcoat_core::{ControlError, CoverageError, DynamicsError, GroundEffectError, PanelError, SurfaceError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// Anything wrong with the inputs: unreadable files, bad JSON, values out
    /// of range, inconsistent scenario settings.
    #[error("config error: {0}")]
    Config(String),
    /// The simulation or one of the estimators failed numerically.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("evaluation window contains no samples")]
    EmptyWindow,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    pub fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }

    /// Process exit code for the command line.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

impl From<serde_json::Error> for SimError {
    fn from(e: serde_json::Error) -> Self {
        SimError::Config(e.to_string())
    }
}

impl From<csv::Error> for SimError {
    fn from(e: csv::Error) -> Self {
        SimError::Config(e.to_string())
    }
}

impl From<DynamicsError> for SimError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::InvalidParams(_) | DynamicsError::InvalidTimeStep(_) => SimError::Config(e.to_string()),
            _ => SimError::Numerical(e.to_string()),
        }
    }
}

impl From<ControlError> for SimError {
    fn from(e: ControlError) -> Self {
        match e {
            ControlError::InvalidEstimator(_) => SimError::Config(e.to_string()),
            ControlError::GroundEffect(GroundEffectError::InvalidModel(_)) => SimError::Config(e.to_string()),
            _ => SimError::Numerical(e.to_string()),
        }
    }
}

impl From<GroundEffectError> for SimError {
    fn from(e: GroundEffectError) -> Self {
        match e {
            GroundEffectError::Degenerate => SimError::Numerical(e.to_string()),
            _ => SimError::Config(e.to_string()),
        }
    }
}

impl From<SurfaceError> for SimError {
    fn from(e: SurfaceError) -> Self {
        SimError::Config(e.to_string())
    }
}

impl From<CoverageError> for SimError {
    fn from(e: CoverageError) -> Self {
        SimError::Config(e.to_string())
    }
}

impl From<PanelError> for SimError {
    fn from(e: PanelError) -> Self {
        match e {
            PanelError::InvalidParameter(_) => SimError::Config(e.to_string()),
            _ => SimError::Numerical(e.to_string()),
        }
    }
}
