//! Forecast accuracy metrics over observed cells: mean absolute error of
//! the point (median) forecast, and strict lower/upper miscoverage rates of
//! an interval pair.

use crate::forecast::ForecastFrame;
use crate::panel::{DesignSet, Day};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no observed cells to evaluate")]
    EmptyTestSet,
    #[error("frames are not aligned: {0}")]
    AlignmentError(String),
}

/// Metrics restricted to one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct AheadMetrics {
    pub ahead: Day,
    pub mae: f64,
    pub lmr: Option<f64>,
    pub umr: Option<f64>,
    pub m: usize,
}

/// Overall metrics plus the per-horizon breakdown. Miscoverage rates are
/// present only when an interval pair was supplied. Horizons with no
/// observed cells are omitted from `per_ahead`; the per-horizon cell
/// counts sum to `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub mae: f64,
    pub lmr: Option<f64>,
    pub umr: Option<f64>,
    pub m: usize,
    pub per_ahead: Vec<AheadMetrics>,
}

fn check_aligned(
    truth: &DesignSet,
    frame: &ForecastFrame,
    what: &str,
) -> Result<(), MetricsError> {
    if truth.row_index != frame.row_index || truth.ahead_index != frame.ahead_index {
        return Err(MetricsError::AlignmentError(format!(
            "{what} frame does not match the truth rows/horizons"
        )));
    }
    Ok(())
}

/// Per-horizon metrics; horizons with no observed cells yield no row.
pub fn per_ahead_metrics(
    truth: &DesignSet,
    median: &ForecastFrame,
    interval: Option<(&ForecastFrame, &ForecastFrame)>,
) -> Result<Vec<AheadMetrics>, MetricsError> {
    check_aligned(truth, median, "median")?;
    if let Some((lower, upper)) = interval {
        check_aligned(truth, lower, "lower")?;
        check_aligned(truth, upper, "upper")?;
    }
    let mut out = Vec::new();
    for j in 0..truth.num_aheads() {
        let mut abs_sum = 0.0;
        let mut below = 0usize;
        let mut above = 0usize;
        let mut m = 0usize;
        for r in 0..truth.num_rows() {
            if truth.w.get(r, j) != 1.0 {
                continue;
            }
            let y = truth.y.get(r, j);
            abs_sum += (y - median.values.get(r, j)).abs();
            if let Some((lower, upper)) = interval {
                if y < lower.values.get(r, j) {
                    below += 1;
                }
                if y > upper.values.get(r, j) {
                    above += 1;
                }
            }
            m += 1;
        }
        if m == 0 {
            continue;
        }
        out.push(AheadMetrics {
            ahead: truth.ahead_index[j],
            mae: abs_sum / m as f64,
            lmr: interval.map(|_| below as f64 / m as f64),
            umr: interval.map(|_| above as f64 / m as f64),
            m,
        });
    }
    Ok(out)
}

/// Overall metrics averaged over every observed cell. Miscoverage counts
/// strict exceedances: `truth < lower` and `truth > upper`.
pub fn compute_metrics(
    truth: &DesignSet,
    median: &ForecastFrame,
    interval: Option<(&ForecastFrame, &ForecastFrame)>,
) -> Result<MetricReport, MetricsError> {
    let per_ahead = per_ahead_metrics(truth, median, interval)?;
    let m: usize = per_ahead.iter().map(|a| a.m).sum();
    if m == 0 {
        return Err(MetricsError::EmptyTestSet);
    }
    let weighted = |f: fn(&AheadMetrics) -> Option<f64>| -> Option<f64> {
        per_ahead
            .iter()
            .map(|a| f(a).map(|v| v * a.m as f64))
            .sum::<Option<f64>>()
            .map(|t| t / m as f64)
    };
    Ok(MetricReport {
        mae: per_ahead.iter().map(|a| a.mae * a.m as f64).sum::<f64>() / m as f64,
        lmr: weighted(|a| a.lmr),
        umr: weighted(|a| a.umr),
        m,
        per_ahead,
    })
}
