//! Quantile multi-period forecasting under the pinball loss.
//!
//! The baseline model fits one quantile regression per horizon (the loss
//! separates across horizons). The smooth model constrains coefficients to
//! the basis span, which requires materializing the Kronecker-expanded
//! feature matrix: unlike squared error, the pinball loss is not invariant
//! under orthogonal maps of the response, so there is no fast path.

mod ipm;

use crate::basis::BasisMatrix;
use crate::forecast::{
    expanded_observed_system, predict_values, CoefficientSet, CoefficientValues,
};
use crate::linalg::{qr_orthonormalize, solve_least_squares, LinalgError, Matrix};
use crate::panel::{Day, DesignSet};
use thiserror::Error;

/// Iteration cap for the interior-point solver.
pub const MAX_ITERATIONS: usize = 200;
/// Relative duality-gap tolerance declared converged.
pub const GAP_TOLERANCE: f64 = 1e-8;

fn ahead_note(ahead: &Option<Day>) -> String {
    ahead.map_or_else(String::new, |a| format!(" (ahead {a})"))
}

#[derive(Debug, Error)]
pub enum QuantileError {
    #[error("quantile level {0} is outside (0, 1)")]
    InvalidLevel(f64),
    #[error("weight {weight} at row {row} is negative or not finite")]
    InvalidWeight { row: usize, weight: f64 },
    #[error("rank-deficient design{}", ahead_note(.ahead))]
    RankDeficient { ahead: Option<Day> },
    #[error(
        "interior-point solver stopped{} after {iterations} iterations at relative gap {rel_gap:.3e}",
        ahead_note(.ahead)
    )]
    NonConvergence {
        ahead: Option<Day>,
        iterations: usize,
        rel_gap: f64,
    },
    #[error("design horizons {design:?} do not match basis horizons {basis:?}")]
    AheadMismatch { design: Vec<Day>, basis: Vec<Day> },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

impl QuantileError {
    fn tag(self, ahead: Day) -> Self {
        match self {
            Self::RankDeficient { ahead: None } => Self::RankDeficient { ahead: Some(ahead) },
            Self::NonConvergence {
                ahead: None,
                iterations,
                rel_gap,
            } => Self::NonConvergence {
                ahead: Some(ahead),
                iterations,
                rel_gap,
            },
            other => other,
        }
    }
}

/// A quantile level, strictly between 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub fn new(tau: f64) -> Result<Self, QuantileError> {
        if tau.is_finite() && 0.0 < tau && tau < 1.0 {
            Ok(Self(tau))
        } else {
            Err(QuantileError::InvalidLevel(tau))
        }
    }

    pub fn tau(self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for QuantileLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Pinball (check) loss: `tau * (y - yhat)` when the truth is at or above
/// the prediction, `(1 - tau) * (yhat - y)` otherwise. Zero iff they agree.
pub fn pinball(y: f64, yhat: f64, tau: QuantileLevel) -> f64 {
    let t = tau.tau();
    if y >= yhat {
        t * (y - yhat)
    } else {
        (1.0 - t) * (yhat - y)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pinball_sum(x: &Matrix, y: &[f64], theta: &[f64], tau: QuantileLevel) -> f64 {
    (0..x.rows())
        .map(|i| pinball(y[i], dot(x.row(i), theta), tau))
        .sum()
}

/// Snaps a near-optimal iterate to the vertex it identifies: refit exactly
/// through the k rows with the smallest residuals. Returns None when those
/// rows are degenerate.
fn snap_to_vertex(x: &Matrix, y: &[f64], theta: &[f64]) -> Option<Vec<f64>> {
    let k = x.cols();
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let resid: Vec<f64> = (0..x.rows())
        .map(|i| (y[i] - dot(x.row(i), theta)).abs())
        .collect();
    order.sort_by(|&a, &b| resid[a].total_cmp(&resid[b]).then(a.cmp(&b)));
    let take = &order[..k];
    let xb = x.select_rows(take);
    let yb = Matrix::from_fn(k, 1, |i, _| y[take[i]]);
    let sol = solve_least_squares(&xb, &yb).ok()?;
    Some(sol.column(0))
}

/// Minimizes the weighted pinball loss `sum_i w_i * pinball(y_i, x_i'theta)`
/// over `theta`. Weights must be non-negative and finite; zero-weight rows
/// are deleted, positive weights are folded in by scaling rows (the loss is
/// positively homogeneous). The returned objective is within relative
/// tolerance 1e-6 of the optimum; where the optimum is a face, any point of
/// it may be returned, normally a vertex.
pub fn solve_weighted_qr(
    x: &Matrix,
    y: &[f64],
    w: &[f64],
    tau: QuantileLevel,
) -> Result<Vec<f64>, QuantileError> {
    if y.len() != x.rows() || w.len() != x.rows() {
        return Err(QuantileError::ShapeMismatch(format!(
            "{} feature rows, {} responses, {} weights",
            x.rows(),
            y.len(),
            w.len()
        )));
    }
    if let Some(row) = w.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(QuantileError::InvalidWeight {
            row,
            weight: w[row],
        });
    }
    let kept: Vec<usize> = (0..x.rows()).filter(|&i| w[i] > 0.0).collect();
    let k = x.cols();
    if kept.len() < k || k == 0 {
        return Err(QuantileError::RankDeficient { ahead: None });
    }
    let xs = Matrix::from_fn(kept.len(), k, |i, j| w[kept[i]] * x.get(kept[i], j));
    let ys: Vec<f64> = kept.iter().map(|&i| w[i] * y[i]).collect();
    match qr_orthonormalize(&xs) {
        Ok(_) => {}
        Err(LinalgError::RankDeficient(_)) => {
            return Err(QuantileError::RankDeficient { ahead: None })
        }
        Err(other) => return Err(QuantileError::ShapeMismatch(other.to_string())),
    }

    let mut theta = ipm::solve(&xs, &ys, tau.tau(), MAX_ITERATIONS, GAP_TOLERANCE).map_err(
        |ipm::IpmFailure::NonConvergence {
             iterations,
             rel_gap,
         }| QuantileError::NonConvergence {
            ahead: None,
            iterations,
            rel_gap,
        },
    )?;
    let objective = pinball_sum(&xs, &ys, &theta, tau);
    if let Some(vertex) = snap_to_vertex(&xs, &ys, &theta) {
        let vertex_objective = pinball_sum(&xs, &ys, &vertex, tau);
        if vertex_objective <= objective + 1e-9 * (1.0 + objective.abs()) {
            theta = vertex;
        }
    }
    Ok(theta)
}

/// Per-horizon quantile fits, one regression per horizon on the rows whose
/// response at that horizon is observed.
pub fn fit_baseline_q(
    design: &DesignSet,
    tau: QuantileLevel,
) -> Result<CoefficientSet, QuantileError> {
    let m = design.num_features();
    let q = design.num_aheads();
    let mut b = Matrix::zeros(q, m);
    for j in 0..q {
        let ahead = design.ahead_index[j];
        let rows: Vec<usize> = (0..design.num_rows())
            .filter(|&r| design.w.get(r, j) == 1.0)
            .collect();
        let x_sub = design.x.select_rows(&rows);
        let y_col = design.y.column(j);
        let y_sub: Vec<f64> = rows.iter().map(|&r| y_col[r]).collect();
        let ones = vec![1.0; rows.len()];
        let coef =
            solve_weighted_qr(&x_sub, &y_sub, &ones, tau).map_err(|e| e.tag(ahead))?;
        for c in 0..m {
            b.set(j, c, coef[c]);
        }
    }
    Ok(CoefficientSet {
        values: CoefficientValues::Baseline { b },
        column_index: design.column_index.clone(),
        ahead_index: design.ahead_index.clone(),
    })
}

/// Smooth quantile fit: minimizes the pinball loss over coefficients of the
/// form `theta' H'`, by solving one quantile regression on the observed rows
/// of the Kronecker-expanded system.
pub fn fit_smooth_q(
    design: &DesignSet,
    basis: &BasisMatrix,
    tau: QuantileLevel,
) -> Result<CoefficientSet, QuantileError> {
    if design.ahead_index != basis.aheads() {
        return Err(QuantileError::AheadMismatch {
            design: design.ahead_index.clone(),
            basis: basis.aheads().to_vec(),
        });
    }
    let m = design.num_features();
    let d = basis.degrees_of_freedom();
    let (xt, yv) = expanded_observed_system(design, basis.h());
    let ones = vec![1.0; xt.rows()];
    let theta_vec = solve_weighted_qr(&xt, &yv, &ones, tau)?;
    let theta = Matrix::from_fn(d, m, |l, c| theta_vec[l * m + c]);
    Ok(CoefficientSet {
        values: CoefficientValues::Smooth {
            theta,
            basis: basis.clone(),
        },
        column_index: design.column_index.clone(),
        ahead_index: design.ahead_index.clone(),
    })
}

/// Fits for several quantile levels that share a design and model form.
#[derive(Debug, Clone)]
pub struct QuantileCoefficientSet {
    levels: Vec<QuantileLevel>,
    fits: Vec<CoefficientSet>,
}

impl QuantileCoefficientSet {
    /// Levels must be strictly increasing and match fits one-to-one.
    pub fn new(
        levels: Vec<QuantileLevel>,
        fits: Vec<CoefficientSet>,
    ) -> Result<Self, QuantileError> {
        if levels.len() != fits.len() || levels.is_empty() {
            return Err(QuantileError::ShapeMismatch(format!(
                "{} levels vs {} fits",
                levels.len(),
                fits.len()
            )));
        }
        if !levels.windows(2).all(|p| p[0].tau() < p[1].tau()) {
            return Err(QuantileError::ShapeMismatch(
                "levels must be strictly increasing".into(),
            ));
        }
        Ok(Self { levels, fits })
    }

    pub fn levels(&self) -> &[QuantileLevel] {
        &self.levels
    }

    pub fn fits(&self) -> &[CoefficientSet] {
        &self.fits
    }

    pub fn fit_for(&self, tau: QuantileLevel) -> Option<&CoefficientSet> {
        self.levels
            .iter()
            .position(|l| l.tau() == tau.tau())
            .map(|i| &self.fits[i])
    }
}

/// Total pinball loss of a fitted model over the observed cells of a design.
pub fn pinball_objective(
    design: &DesignSet,
    coef: &CoefficientSet,
    tau: QuantileLevel,
) -> Result<f64, QuantileError> {
    let pred = predict_values(coef, &design.x)
        .map_err(|e| QuantileError::ShapeMismatch(e.to_string()))?;
    let mut total = 0.0;
    for r in 0..design.num_rows() {
        for j in 0..design.num_aheads() {
            if design.w.get(r, j) == 1.0 {
                total += pinball(design.y.get(r, j), pred.get(r, j), tau);
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, BasisSpec};
    use crate::panel::{ColumnKey, RowKey};
    use approx::assert_abs_diff_eq;

    fn level(tau: f64) -> QuantileLevel {
        QuantileLevel::new(tau).unwrap()
    }

    fn intercept_design(y: &[f64]) -> (Matrix, Vec<f64>, Vec<f64>) {
        let n = y.len();
        (Matrix::from_fn(n, 1, |_, _| 1.0), y.to_vec(), vec![1.0; n])
    }

    #[test]
    fn pinball_values() {
        let half = level(0.5);
        assert_eq!(pinball(3.0, 3.0, half), 0.0);
        assert_eq!(pinball(1.0, 0.0, half), 0.5);
        assert_eq!(pinball(0.0, 1.0, level(0.2)), 0.8);
        assert_eq!(pinball(1.0, 0.0, level(0.2)), 0.2);
    }

    #[test]
    fn level_validation() {
        assert!(QuantileLevel::new(0.0).is_err());
        assert!(QuantileLevel::new(1.0).is_err());
        assert!(QuantileLevel::new(f64::NAN).is_err());
        assert!(QuantileLevel::new(0.5).is_ok());
    }

    #[test]
    fn intercept_only_median_is_exact() {
        let (x, y, w) = intercept_design(&[3.0, 1.0, 4.0, 1.5, 5.0]);
        let theta = solve_weighted_qr(&x, &y, &w, level(0.5)).unwrap();
        assert_eq!(theta, vec![3.0]);
    }

    #[test]
    fn intercept_only_general_tau_hits_order_statistic() {
        // tau = 0.25 with four points: any value in [1, 2] is optimal with
        // objective 1.5; the solver lands on a vertex.
        let (x, y, w) = intercept_design(&[1.0, 2.0, 3.0, 4.0]);
        let theta = solve_weighted_qr(&x, &y, &w, level(0.25)).unwrap();
        assert!(theta[0] == 1.0 || theta[0] == 2.0, "theta = {}", theta[0]);
        let objective = pinball_sum(&x, &y, &theta, level(0.25));
        assert_abs_diff_eq!(objective, 1.5, epsilon = 1e-9);
    }

    #[test]
    fn interpolation_recovers_exactly() {
        let x = Matrix::from_fn(7, 2, |i, j| ((2 * i + 3 * j + 1) % 5) as f64 + 0.25);
        let truth = [2.0, -1.0];
        let y: Vec<f64> = (0..7).map(|i| dot(x.row(i), &truth)).collect();
        let w = vec![1.0; 7];
        let theta = solve_weighted_qr(&x, &y, &w, level(0.7)).unwrap();
        assert!((theta[0] - 2.0).abs() < 1e-8 && (theta[1] + 1.0).abs() < 1e-8);
        assert!(pinball_sum(&x, &y, &theta, level(0.7)) < 1e-10);
    }

    #[test]
    fn zero_weights_delete_rows() {
        let x = Matrix::from_fn(9, 2, |i, j| ((i * 3 + j * 5) % 7) as f64 + 0.5);
        let y: Vec<f64> = (0..9).map(|i| (i as f64 * 1.3).sin() * 4.0).collect();
        let mut w = vec![1.0; 9];
        w[4] = 0.0;
        w[7] = 0.0;
        let with_zeros = solve_weighted_qr(&x, &y, &w, level(0.4)).unwrap();
        let kept: Vec<usize> = (0..9).filter(|&i| w[i] > 0.0).collect();
        let xk = x.select_rows(&kept);
        let yk: Vec<f64> = kept.iter().map(|&i| y[i]).collect();
        let direct = solve_weighted_qr(&xk, &yk, &vec![1.0; kept.len()], level(0.4)).unwrap();
        assert!((with_zeros[0] - direct[0]).abs() < 1e-8);
        assert!((with_zeros[1] - direct[1]).abs() < 1e-8);
    }

    #[test]
    fn positive_weights_match_row_duplication() {
        let x = Matrix::from_fn(6, 2, |i, j| {
            if j == 0 {
                1.0
            } else {
                (i as f64 * 0.9).sin() + 0.2
            }
        });
        let y = [1.2, -0.7, 2.9, 0.4, -1.8, 2.2];
        let mut w = vec![1.0; 6];
        w[2] = 2.0;
        let weighted = solve_weighted_qr(&x, &y, &w, level(0.5)).unwrap();
        let rows: Vec<usize> = vec![0, 1, 2, 2, 3, 4, 5];
        let xd = x.select_rows(&rows);
        let yd: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
        let dup = solve_weighted_qr(&xd, &yd, &vec![1.0; 7], level(0.5)).unwrap();
        let obj_w = |t: &[f64]| {
            (0..6)
                .map(|i| w[i] * pinball(y[i], dot(x.row(i), t), level(0.5)))
                .sum::<f64>()
        };
        assert_abs_diff_eq!(obj_w(&weighted), obj_w(&dup), epsilon = 1e-8);
    }

    #[test]
    fn negative_weight_is_rejected() {
        let (x, y, mut w) = intercept_design(&[1.0, 2.0, 3.0]);
        w[1] = -0.5;
        assert!(matches!(
            solve_weighted_qr(&x, &y, &w, level(0.5)),
            Err(QuantileError::InvalidWeight { row: 1, .. })
        ));
    }

    #[test]
    fn rank_deficiency_is_detected() {
        let x = Matrix::from_fn(5, 2, |i, j| (i as f64 + 1.0) * (j as f64 + 1.0));
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let w = vec![1.0; 5];
        assert!(matches!(
            solve_weighted_qr(&x, &y, &w, level(0.5)),
            Err(QuantileError::RankDeficient { ahead: None })
        ));
    }

    fn complete_design(x: Matrix, y: Matrix, aheads: Vec<Day>) -> DesignSet {
        let n = x.rows();
        let q = y.cols();
        DesignSet {
            w: Matrix::from_fn(n, q, |_, _| 1.0),
            row_index: (0..n)
                .map(|r| RowKey {
                    location: format!("loc{r:03}"),
                    time: 0,
                })
                .collect(),
            column_index: (0..x.cols())
                .map(|c| ColumnKey {
                    variable: format!("x{c}"),
                    lag: 0,
                })
                .collect(),
            ahead_index: aheads,
            x,
            y,
        }
    }

    #[test]
    fn single_horizon_baseline_matches_direct_solve() {
        let x = Matrix::from_fn(8, 2, |i, j| ((i * 2 + j * 3) % 5) as f64 + 0.5);
        let y = Matrix::from_fn(8, 1, |i, _| (i as f64 * 0.9).cos() * 3.0);
        let d = complete_design(x.clone(), y.clone(), vec![0]);
        let fit = fit_baseline_q(&d, level(0.3)).unwrap();
        let direct =
            solve_weighted_qr(&x, &y.column(0), &vec![1.0; 8], level(0.3)).unwrap();
        let b = fit.induced_b();
        assert_eq!(b.row(0), direct.as_slice());
    }

    #[test]
    fn noiseless_baseline_recovery() {
        let x = Matrix::from_fn(10, 2, |i, j| ((i + 1) as f64).powi(j as i32 + 1) / 8.0);
        let truth = Matrix::from_vec(2, 2, vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let y = x.matmul(&truth.transpose());
        let d = complete_design(x, y, vec![0, 1]);
        let fit = fit_baseline_q(&d, level(0.5)).unwrap();
        assert!(fit.induced_b().sub(&truth).max_abs() < 1e-7);
        assert!(pinball_objective(&d, &fit, level(0.5)).unwrap() < 1e-9);
    }

    #[test]
    fn pooled_median_for_constant_smooth_model() {
        // d=1 with a single intercept predictor collapses to one constant
        // prediction for every cell, so the fit is the pooled median.
        let q = 3;
        let n = 5;
        let values = [4.0, 1.0, 3.5, 2.0, 8.0, 0.5, 6.0, 2.5, 7.0, 1.5, 5.0, 9.0, 2.2, 3.8, 4.4];
        let x = Matrix::from_fn(n, 1, |_, _| 1.0);
        let y = Matrix::from_fn(n, q, |i, j| values[i * q + j]);
        let d = complete_design(x, y, vec![0, 1, 2]);
        let basis = build_basis(&BasisSpec::polynomial(1, vec![0, 1, 2])).unwrap();
        let fit = fit_smooth_q(&d, &basis, level(0.5)).unwrap();
        let pred = predict_values(&fit, &d.x).unwrap();
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        assert_abs_diff_eq!(pred.get(0, 0), median, epsilon = 1e-9);
    }

    #[test]
    fn full_basis_smooth_matches_baseline_objective() {
        let x = Matrix::from_fn(20, 2, |i, j| ((i * 7 + j * 11) % 13) as f64 / 6.0 + 0.2);
        let y = Matrix::from_fn(20, 3, |i, j| ((i * 5 + j * 3) % 17) as f64 / 4.0 - 2.0);
        let d = complete_design(x, y, vec![0, 1, 2]);
        let basis = build_basis(&BasisSpec::polynomial(3, vec![0, 1, 2])).unwrap();
        for tau in [0.2, 0.5, 0.8] {
            let t = level(tau);
            let base = pinball_objective(&d, &fit_baseline_q(&d, t).unwrap(), t).unwrap();
            let smooth = pinball_objective(&d, &fit_smooth_q(&d, &basis, t).unwrap(), t).unwrap();
            assert!(
                (smooth - base).abs() <= 1e-6 * base.abs().max(1.0),
                "tau {tau}: smooth {smooth} vs baseline {base}"
            );
        }
    }

    #[test]
    fn scaling_responses_scales_coefficients() {
        let x = Matrix::from_fn(12, 2, |i, j| ((i * 3 + j) % 7) as f64 / 2.0 + 0.3);
        let y: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin() * 2.0 + 0.4).collect();
        let w = vec![1.0; 12];
        let t = level(0.8);
        let theta = solve_weighted_qr(&x, &y, &w, t).unwrap();
        let y5: Vec<f64> = y.iter().map(|v| 5.0 * v).collect();
        let theta5 = solve_weighted_qr(&x, &y5, &w, t).unwrap();
        for c in 0..2 {
            assert_abs_diff_eq!(
                theta5[c],
                5.0 * theta[c],
                epsilon = 1e-8 * (1.0 + theta[c].abs() * 5.0)
            );
        }
    }

    #[test]
    fn level_set_requires_increasing_levels() {
        let x = Matrix::from_fn(6, 1, |i, _| i as f64 + 1.0);
        let y = Matrix::from_fn(6, 1, |i, _| 2.0 * (i as f64 + 1.0));
        let d = complete_design(x, y, vec![0]);
        let f = fit_baseline_q(&d, level(0.5)).unwrap();
        assert!(QuantileCoefficientSet::new(vec![level(0.8), level(0.2)], vec![f.clone(), f.clone()]).is_err());
        let ok = QuantileCoefficientSet::new(vec![level(0.2), level(0.8)], vec![f.clone(), f]).unwrap();
        assert!(ok.fit_for(level(0.8)).is_some());
        assert!(ok.fit_for(level(0.5)).is_none());
    }
}
