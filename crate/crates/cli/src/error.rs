use spectratact::calibration::CalibrationError;
use spectratact::config::ConfigError;
use spectratact::fivebar::KinematicsError;
use spectratact::io::IoError;
use spectratact::sensor::SensorError;
use spectratact::twin::TwinError;
use thiserror::Error;

/// CLI failure, carrying the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, bad arguments or an I/O failure.
    #[error("{0}")]
    Config(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("kinematics: {0}")]
    Kinematic(String),
    #[error("replay mismatch: {0}")]
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::Kinematic(_) => 4,
            CliError::Mismatch(_) => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SensorError> for CliError {
    fn from(e: SensorError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<CalibrationError> for CliError {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::Sensor(s) => s.into(),
            other => CliError::Degenerate(other.to_string()),
        }
    }
}

impl From<KinematicsError> for CliError {
    fn from(e: KinematicsError) -> Self {
        match e {
            KinematicsError::InvalidConfig(_) | KinematicsError::InvalidGrid(_) => CliError::Config(e.to_string()),
            other => CliError::Kinematic(other.to_string()),
        }
    }
}

impl From<TwinError> for CliError {
    fn from(e: TwinError) -> Self {
        match e {
            TwinError::UnreachableSample { .. } | TwinError::EncoderRange { .. } => CliError::Kinematic(e.to_string()),
            TwinError::Kinematics(k) => k.into(),
            TwinError::Calibration(c) => c.into(),
            TwinError::Sensor(s) => s.into(),
            TwinError::InvalidTrajectory(_) | TwinError::Decode(_) => CliError::Config(e.to_string()),
        }
    }
}
