//! The model artifact: a versioned, self-describing JSON document holding
//! the task, the fitted coefficients (per-horizon matrix or basis
//! coordinates), optional per-quantile payloads, and optional calibration
//! margins. Matrices are stored row-major as nested arrays with explicit
//! dimensions, so artifacts are diffable and round-trip bit-exactly.

use crate::error::CliError;
use mpf_core::basis::{build_basis, BasisSpec};
use mpf_core::calibration::CalibrationMargins;
use mpf_core::forecast::{CoefficientSet, CoefficientValues};
use mpf_core::linalg::Matrix;
use mpf_core::panel::{PredictorSpec, TaskSpec};
use mpf_core::quantile::QuantileLevel;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactPredictor {
    pub variable: String,
    pub lags: Vec<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactTask {
    pub response: String,
    pub predictors: Vec<ArtifactPredictor>,
    pub aheads: Vec<i64>,
    pub forecast_times: Vec<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub as_of: Option<i64>,
    /// Whether panel times were ISO dates; days are stored numerically
    /// either way and formatted back on output.
    pub dates: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactBasis {
    pub family: String,
    pub degrees_of_freedom: usize,
    pub aheads: Vec<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantilePayload {
    pub tau: f64,
    pub coefficients: ArtifactMatrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactMargins {
    pub lower_tau: f64,
    pub upper_tau: f64,
    pub q_lower: f64,
    pub q_upper: f64,
    pub level: f64,
}

/// Facts about the fit that stay byte-stable across reruns: counts and
/// objective values only, no wall-clock stamps.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ArtifactMetadata {
    pub train_rows: usize,
    pub observed_cells: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_ahead_objective: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration_cutoff: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration_rows: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    /// "baseline" or "smooth".
    pub kind: String,
    pub task: ArtifactTask,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<ArtifactBasis>,
    /// Point-forecast payload: q x m per-horizon matrix for "baseline",
    /// d x m basis coordinates for "smooth".
    pub coefficients: ArtifactMatrix,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantiles: Option<Vec<QuantilePayload>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margins: Option<ArtifactMargins>,
    pub metadata: ArtifactMetadata,
}

pub fn matrix_to_payload(m: &Matrix) -> ArtifactMatrix {
    ArtifactMatrix {
        rows: m.rows(),
        cols: m.cols(),
        data: (0..m.rows()).map(|i| m.row(i).to_vec()).collect(),
    }
}

pub fn payload_to_matrix(p: &ArtifactMatrix, what: &str) -> Result<Matrix, CliError> {
    if p.data.len() != p.rows || p.data.iter().any(|r| r.len() != p.cols) {
        return Err(CliError::Data(format!(
            "{what}: payload shape does not match its declared {}x{} dimensions",
            p.rows, p.cols
        )));
    }
    Matrix::from_rows(&p.data).map_err(|e| CliError::Data(format!("{what}: {e}")))
}

pub fn task_to_artifact(task: &TaskSpec, dates: bool) -> ArtifactTask {
    ArtifactTask {
        response: task.response.clone(),
        predictors: task
            .predictors
            .iter()
            .map(|p| ArtifactPredictor {
                variable: p.variable.clone(),
                lags: p.lags.clone(),
            })
            .collect(),
        aheads: task.aheads.clone(),
        forecast_times: task.forecast_times.clone(),
        as_of: task.as_of,
        dates,
    }
}

pub fn task_from_artifact(t: &ArtifactTask) -> Result<TaskSpec, CliError> {
    let task = TaskSpec {
        response: t.response.clone(),
        predictors: t
            .predictors
            .iter()
            .map(|p| PredictorSpec::new(p.variable.clone(), p.lags.clone()))
            .collect(),
        aheads: t.aheads.clone(),
        forecast_times: t.forecast_times.clone(),
        as_of: t.as_of,
    };
    task.validate()
        .map_err(|e| CliError::Data(format!("artifact task: {e}")))?;
    Ok(task)
}

pub fn margins_to_artifact(m: &CalibrationMargins) -> ArtifactMargins {
    ArtifactMargins {
        lower_tau: m.lower_tau.tau(),
        upper_tau: m.upper_tau.tau(),
        q_lower: m.q_lower,
        q_upper: m.q_upper,
        level: m.level,
    }
}

pub fn margins_from_artifact(m: &ArtifactMargins) -> Result<CalibrationMargins, CliError> {
    let level = |tau: f64, what: &str| {
        QuantileLevel::new(tau).map_err(|e| CliError::Data(format!("artifact {what}: {e}")))
    };
    Ok(CalibrationMargins {
        lower_tau: level(m.lower_tau, "lower_tau")?,
        upper_tau: level(m.upper_tau, "upper_tau")?,
        q_lower: m.q_lower,
        q_upper: m.q_upper,
        level: m.level,
    })
}

/// Reconstructs a labeled coefficient set from a stored payload, rebuilding
/// the basis matrix from its spec (the construction is deterministic, so
/// the rebuilt model predicts bit-identically).
pub fn coefficients_from_artifact(
    art: &ModelArtifact,
    payload: &ArtifactMatrix,
    what: &str,
) -> Result<CoefficientSet, CliError> {
    let task = task_from_artifact(&art.task)?;
    let m = task.num_features();
    let q = task.aheads.len();
    let values = match art.kind.as_str() {
        "baseline" => {
            if payload.rows != q || payload.cols != m {
                return Err(CliError::Data(format!(
                    "{what}: expected a {q}x{m} per-horizon matrix, got {}x{}",
                    payload.rows, payload.cols
                )));
            }
            CoefficientValues::Baseline {
                b: payload_to_matrix(payload, what)?,
            }
        }
        "smooth" => {
            let spec = art.basis.as_ref().ok_or_else(|| {
                CliError::Data(format!("{what}: smooth artifact lacks a basis section"))
            })?;
            if spec.family != "orthogonal-polynomial" {
                return Err(CliError::Data(format!(
                    "{what}: unknown basis family {:?}",
                    spec.family
                )));
            }
            if spec.aheads != task.aheads {
                return Err(CliError::Data(format!(
                    "{what}: basis horizons do not match the task horizons"
                )));
            }
            let d = spec.degrees_of_freedom;
            if payload.rows != d || payload.cols != m {
                return Err(CliError::Data(format!(
                    "{what}: expected a {d}x{m} coordinate matrix, got {}x{}",
                    payload.rows, payload.cols
                )));
            }
            let basis = build_basis(&BasisSpec::polynomial(d, spec.aheads.clone()))
                .map_err(|e| CliError::Data(format!("{what}: {e}")))?;
            CoefficientValues::Smooth {
                theta: payload_to_matrix(payload, what)?,
                basis,
            }
        }
        other => {
            return Err(CliError::Data(format!(
                "{what}: unknown model kind {other:?}"
            )))
        }
    };
    Ok(CoefficientSet {
        values,
        column_index: task.column_index(),
        ahead_index: task.aheads.clone(),
    })
}

pub fn coefficients_to_payload(coef: &CoefficientSet) -> ArtifactMatrix {
    match &coef.values {
        CoefficientValues::Baseline { b } => matrix_to_payload(b),
        CoefficientValues::Smooth { theta, .. } => matrix_to_payload(theta),
    }
}

pub fn load_artifact(path: &Path) -> Result<ModelArtifact, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read artifact {}: {e}", path.display())))?;
    let art: ModelArtifact = serde_json::from_str(&text)?;
    if art.format_version != FORMAT_VERSION {
        return Err(CliError::Data(format!(
            "artifact format version {} is not supported (expected {FORMAT_VERSION})",
            art.format_version
        )));
    }
    Ok(art)
}

pub fn save_artifact(path: &Path, art: &ModelArtifact) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(art)?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write artifact {}: {e}", path.display())))?;
    Ok(())
}
