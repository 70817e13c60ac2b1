use std::process::ExitCode;

/// Command failure, split by exit status.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    /// Bad configuration, input data or a violated precondition.
    #[error("{0:#}")]
    Validation(#[from] anyhow::Error),
    /// The run finished but a numerical comparison exceeded its tolerance.
    #[error("tolerance check failed: {0}")]
    Tolerance(String),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Validation(_) => ExitCode::from(1),
            Failure::Tolerance(_) => ExitCode::from(2),
        }
    }
}

impl From<drivesus_core::Error> for Failure {
    fn from(e: drivesus_core::Error) -> Self {
        match e {
            drivesus_core::Error::QuadratureTolerance { .. } => Failure::Tolerance(e.to_string()),
            other => Failure::Validation(other.into()),
        }
    }
}
