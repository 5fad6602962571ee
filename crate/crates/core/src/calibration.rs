//! Conformal calibration of quantile-pair prediction intervals.
//!
//! On a held-out calibration slice, the signed exceedances of the truth
//! past each interval end are collected; an empirical quantile of each
//! tail's errors becomes an additive margin that widens (or narrows) every
//! subsequent interval. Exchangeability of calibration and test cells is
//! what restores coverage.

use crate::forecast::ForecastFrame;
use crate::panel::DesignSet;
use crate::quantile::QuantileLevel;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("frames are not aligned: {0}")]
    AlignmentError(String),
    #[error("calibration set has no observed cells")]
    EmptyCalibrationSet,
    #[error("calibration level {0} is outside (0, 1)")]
    InvalidLevel(f64),
}

/// Additive interval corrections: subtract `q_lower` from the lower bound
/// and add `q_upper` to the upper bound. `level` is the empirical-quantile
/// order the margins were computed at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationMargins {
    pub lower_tau: QuantileLevel,
    pub upper_tau: QuantileLevel,
    pub q_lower: f64,
    pub q_upper: f64,
    pub level: f64,
}

fn check_aligned(a: &ForecastFrame, b: &ForecastFrame, what: &str) -> Result<(), CalibrationError> {
    if a.row_index != b.row_index || a.ahead_index != b.ahead_index {
        return Err(CalibrationError::AlignmentError(format!(
            "{what} frame rows/horizons differ"
        )));
    }
    Ok(())
}

fn check_frame_matches_design(
    truth: &DesignSet,
    frame: &ForecastFrame,
    what: &str,
) -> Result<(), CalibrationError> {
    if truth.row_index != frame.row_index || truth.ahead_index != frame.ahead_index {
        return Err(CalibrationError::AlignmentError(format!(
            "{what} frame does not match the truth rows/horizons"
        )));
    }
    Ok(())
}

/// Signed interval errors over the observed cells of `truth`:
/// `E_lower = lower - y` (positive exactly when the truth falls below the
/// interval) and `E_upper = y - upper` (positive exactly when it exceeds
/// it). The two vectors visit the same cells in the same order.
pub fn interval_errors(
    truth: &DesignSet,
    lower: &ForecastFrame,
    upper: &ForecastFrame,
) -> Result<(Vec<f64>, Vec<f64>), CalibrationError> {
    check_frame_matches_design(truth, lower, "lower")?;
    check_frame_matches_design(truth, upper, "upper")?;
    let mut e_lower = Vec::new();
    let mut e_upper = Vec::new();
    for r in 0..truth.num_rows() {
        for j in 0..truth.num_aheads() {
            if truth.w.get(r, j) == 1.0 {
                let y = truth.y.get(r, j);
                e_lower.push(lower.values.get(r, j) - y);
                e_upper.push(y - upper.values.get(r, j));
            }
        }
    }
    Ok((e_lower, e_upper))
}

/// Margin at the conformal rank: the order statistic of the sorted errors
/// at position ceil(level * (M+1)), clamped into [1, M].
fn empirical_margin(errors: &[f64], level: f64) -> f64 {
    let m = errors.len();
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (level * (m as f64 + 1.0)).ceil() as usize;
    sorted[rank.clamp(1, m) - 1]
}

/// Computes per-tail margins from interval-error vectors at the given
/// empirical-quantile level.
pub fn compute_margins(
    e_lower: &[f64],
    e_upper: &[f64],
    level: f64,
    lower_tau: QuantileLevel,
    upper_tau: QuantileLevel,
) -> Result<CalibrationMargins, CalibrationError> {
    if !(level.is_finite() && 0.0 < level && level < 1.0) {
        return Err(CalibrationError::InvalidLevel(level));
    }
    if e_lower.is_empty() || e_upper.is_empty() {
        return Err(CalibrationError::EmptyCalibrationSet);
    }
    if e_lower.len() != e_upper.len() {
        return Err(CalibrationError::AlignmentError(format!(
            "{} lower errors vs {} upper errors",
            e_lower.len(),
            e_upper.len()
        )));
    }
    if lower_tau.tau() >= upper_tau.tau() {
        return Err(CalibrationError::AlignmentError(format!(
            "lower tau {lower_tau} is not below upper tau {upper_tau}"
        )));
    }
    Ok(CalibrationMargins {
        lower_tau,
        upper_tau,
        q_lower: empirical_margin(e_lower, level),
        q_upper: empirical_margin(e_upper, level),
        level,
    })
}

/// Applies margins to an interval pair: every lower bound drops by
/// `q_lower`, every upper bound rises by `q_upper`. Negative margins shrink
/// the interval and may cross the bounds; see [`degenerate_cells`].
pub fn apply_margins(
    lower: &ForecastFrame,
    upper: &ForecastFrame,
    margins: &CalibrationMargins,
) -> Result<(ForecastFrame, ForecastFrame), CalibrationError> {
    check_aligned(lower, upper, "interval")?;
    let mut lo = lower.clone();
    let mut hi = upper.clone();
    for r in 0..lo.values.rows() {
        for j in 0..lo.values.cols() {
            lo.values.set(r, j, lower.values.get(r, j) - margins.q_lower);
            hi.values.set(r, j, upper.values.get(r, j) + margins.q_upper);
        }
    }
    Ok((lo, hi))
}

/// Number of cells where the lower bound exceeds the upper bound.
pub fn degenerate_cells(lower: &ForecastFrame, upper: &ForecastFrame) -> usize {
    lower
        .values
        .as_slice()
        .iter()
        .zip(upper.values.as_slice())
        .filter(|(lo, hi)| lo > hi)
        .count()
}
