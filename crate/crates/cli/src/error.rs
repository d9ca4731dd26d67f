//! One error type for everything the driver can fail on, with a
//! machine-readable JSON rendering for the error stream.

use thiserror::Error;

use crate::config::ConfigError;

/// Any failure the experiment driver can report.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] camsim_core::scenario::ScenarioError),
    #[error(transparent)]
    Calib(#[from] camsim_core::calib::CalibError),
    #[error(transparent)]
    Channel(#[from] camsim_core::channel::ChannelError),
    #[error(transparent)]
    Age(#[from] camsim_core::age::AgeError),
    #[error(transparent)]
    Sched(#[from] camsim_core::sched::SchedError),
    #[error(transparent)]
    Fusion(#[from] camsim_core::fusion::FusionError),
    /// No reference view shared enough scene content with the camera
    /// being re-calibrated.
    #[error("no reference camera shares enough scene content with camera {recal_camera}")]
    NoReference { recal_camera: usize },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{message}")]
    InvalidArgument { message: String },
}

impl CliError {
    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Scenario(_) => "scenario",
            CliError::Calib(_) => "calibration",
            CliError::Channel(_) => "channel",
            CliError::Age(_) => "age",
            CliError::Sched(_) => "scheduler",
            CliError::Fusion(_) => "fusion",
            CliError::NoReference { .. } => "calibration",
            CliError::Io { .. } => "io",
            CliError::InvalidArgument { .. } => "argument",
        }
    }

    /// The machine-readable error record emitted on the error stream.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": { "kind": self.kind(), "message": self.to_string() }
        })
        .to_string()
    }
}

/// Convenience constructor for argument errors.
pub fn arg_error(message: impl Into<String>) -> CliError {
    CliError::InvalidArgument {
        message: message.into(),
    }
}
