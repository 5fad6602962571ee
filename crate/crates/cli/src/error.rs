//! Error classification for the exit-code contract: 2 for usage problems,
//! 3 for numerical/fit failures, 4 for data or schema mismatches.

use mpf_core::{
    BasisError, CalibrationError, CvError, FitError, MetricsError, PanelError, QuantileError,
};
use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, malformed config, out-of-domain parameters. Exit 2.
    Usage(String),
    /// The numbers refused: rank deficiency, non-convergence. Exit 3.
    Fit(String),
    /// Unreadable or incompatible data, schema or alignment mismatch. Exit 4.
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Fit(_) => 3,
            CliError::Data(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Fit(m) => write!(f, "fit: {m}"),
            CliError::Data(m) => write!(f, "data: {m}"),
        }
    }
}

impl From<PanelError> for CliError {
    fn from(e: PanelError) -> Self {
        match e {
            // Task-validation problems come from the config file.
            PanelError::InvalidTask(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        CliError::Fit(e.to_string())
    }
}

impl From<QuantileError> for CliError {
    fn from(e: QuantileError) -> Self {
        CliError::Fit(e.to_string())
    }
}

impl From<BasisError> for CliError {
    fn from(e: BasisError) -> Self {
        CliError::Fit(e.to_string())
    }
}

impl From<CvError> for CliError {
    fn from(e: CvError) -> Self {
        match e {
            CvError::Invalid(_) => CliError::Usage(e.to_string()),
            _ => CliError::Fit(e.to_string()),
        }
    }
}

impl From<CalibrationError> for CliError {
    fn from(e: CalibrationError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(format!("artifact: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
