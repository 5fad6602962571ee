//! Multi-period forecasting: regress a response at several future horizons
//! on lagged predictors, fitting either one regression per horizon or a
//! single model whose coefficients vary smoothly across horizons.
//!
//! The pieces, bottom up:
//!
//! - [`linalg`]: dense matrices, least squares, QR, Kronecker products.
//! - [`basis`]: orthonormal polynomial bases over the horizon grid.
//! - [`panel`]: long-format panel ingestion with as-of (issue) semantics
//!   and design-matrix assembly, including the response missingness mask.
//! - [`forecast`]: least-squares fits (per-horizon baseline, smooth, and
//!   the weighted smooth fit for partially observed responses) and
//!   prediction.
//! - [`quantile`]: the same model forms under the pinball loss, solved by
//!   an interior-point method.
//! - [`calibration`]: conformal margins for quantile-pair intervals.
//! - [`metrics`]: MAE and interval miscoverage over observed cells.
//! - [`sim`]: a seeded synthetic-data generator.
//! - [`cv`]: cross-validated selection of the basis size.

pub mod basis;
pub mod calibration;
pub mod cv;
pub mod forecast;
pub mod linalg;
pub mod metrics;
pub mod panel;
pub mod quantile;
pub mod sim;

pub use basis::{build_basis, BasisError, BasisFamily, BasisMatrix, BasisSpec};
pub use calibration::{
    apply_margins, compute_margins, degenerate_cells, interval_errors, CalibrationError,
    CalibrationMargins,
};
pub use cv::{cv_select_df, CvError, CvRow, CvScheme};
pub use forecast::{
    fit_baseline, fit_smooth, fit_smooth_auto, fit_smooth_weighted, predict, predict_values,
    sse_by_ahead, sse_objective, CoefficientSet, CoefficientValues, FitError, ForecastFrame,
    ModelKind,
};
pub use linalg::{
    hadamard, kronecker, qr_orthonormalize, solve_least_squares, LinalgError, Matrix,
};
pub use metrics::{compute_metrics, per_ahead_metrics, AheadMetrics, MetricReport, MetricsError};
pub use panel::{
    build_design, build_design_with, load_panel, load_panel_reader, split_by_time, ColumnKey,
    Day, DesignOptions, DesignSet, PanelDataset, PanelError, PanelRecord, PredictorSpec, RowKey,
    TaskSpec,
};
pub use quantile::{
    fit_baseline_q, fit_smooth_q, pinball, pinball_objective, solve_weighted_qr,
    QuantileCoefficientSet, QuantileError, QuantileLevel,
};
pub use sim::{simulate, NoiseSpec, SimConfig, SimError, SimOutput};
