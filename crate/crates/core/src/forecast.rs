//! Least-squares multi-period forecasting.
//!
//! The baseline model fits one regression per horizon. The smooth model
//! constrains the coefficient matrix to `B = H * Theta`, so each
//! coefficient traces a smooth curve across horizons; with complete
//! responses this reduces to a multi-response regression on `Y * H`, and
//! with partially observed responses it becomes a plain regression on the
//! observed rows of the Kronecker system `(H (x) X) vec = vec(Y)`.

use crate::basis::BasisMatrix;
use crate::linalg::{solve_least_squares, LinalgError, Matrix};
use crate::panel::{ColumnKey, Day, DesignSet, RowKey};
use thiserror::Error;

fn ahead_note(ahead: &Option<Day>) -> String {
    ahead.map_or_else(String::new, |a| format!(" (ahead {a})"))
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("rank-deficient design{}", ahead_note(.ahead))]
    RankDeficient { ahead: Option<Day> },
    #[error("not enough observed rows{}: need {needed}, got {got}", ahead_note(.ahead))]
    InsufficientRows {
        ahead: Option<Day>,
        needed: usize,
        got: usize,
    },
    #[error("responses have unobserved cells; use the weighted smooth fit")]
    IncompleteResponses,
    #[error("design horizons {design:?} do not match basis horizons {basis:?}")]
    AheadMismatch { design: Vec<Day>, basis: Vec<Day> },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

fn lift_linalg(err: LinalgError, ahead: Option<Day>) -> FitError {
    match err {
        LinalgError::RankDeficient(_) => FitError::RankDeficient { ahead },
        other => FitError::ShapeMismatch(other.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Baseline,
    Smooth,
}

/// Fitted coefficients: either the full per-horizon matrix, or the compact
/// basis coordinates of a smooth model.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientValues {
    /// `b` is q x m: row j holds the coefficients for horizon j.
    Baseline { b: Matrix },
    /// `theta` is d x m; the induced per-horizon matrix is `H * theta`.
    Smooth { theta: Matrix, basis: BasisMatrix },
}

/// Coefficients plus the column and horizon labels they were fitted
/// against, so predictions can be aligned back to data.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub values: CoefficientValues,
    pub column_index: Vec<ColumnKey>,
    pub ahead_index: Vec<Day>,
}

impl CoefficientSet {
    pub fn kind(&self) -> ModelKind {
        match self.values {
            CoefficientValues::Baseline { .. } => ModelKind::Baseline,
            CoefficientValues::Smooth { .. } => ModelKind::Smooth,
        }
    }

    pub fn num_features(&self) -> usize {
        self.column_index.len()
    }

    pub fn num_aheads(&self) -> usize {
        self.ahead_index.len()
    }

    /// The q x m per-horizon coefficient matrix, expanding `H * theta` for
    /// smooth models.
    pub fn induced_b(&self) -> Matrix {
        match &self.values {
            CoefficientValues::Baseline { b } => b.clone(),
            CoefficientValues::Smooth { theta, basis } => basis.h().matmul(theta),
        }
    }

    pub fn basis(&self) -> Option<&BasisMatrix> {
        match &self.values {
            CoefficientValues::Baseline { .. } => None,
            CoefficientValues::Smooth { basis, .. } => Some(basis),
        }
    }
}

/// Predictions for a set of rows: `values` is r x q, one column per
/// horizon in `ahead_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastFrame {
    pub row_index: Vec<RowKey>,
    pub ahead_index: Vec<Day>,
    pub values: Matrix,
}

fn check_basis(design: &DesignSet, basis: &BasisMatrix) -> Result<(), FitError> {
    if design.ahead_index != basis.aheads() {
        return Err(FitError::AheadMismatch {
            design: design.ahead_index.clone(),
            basis: basis.aheads().to_vec(),
        });
    }
    Ok(())
}

/// Fits an independent regression per horizon, using for each horizon only
/// the rows whose response at that horizon is observed.
pub fn fit_baseline(design: &DesignSet) -> Result<CoefficientSet, FitError> {
    let m = design.num_features();
    let q = design.num_aheads();
    let mut b = Matrix::zeros(q, m);
    for j in 0..q {
        let ahead = design.ahead_index[j];
        let rows: Vec<usize> = (0..design.num_rows())
            .filter(|&r| design.w.get(r, j) == 1.0)
            .collect();
        if rows.len() < m {
            return Err(FitError::InsufficientRows {
                ahead: Some(ahead),
                needed: m,
                got: rows.len(),
            });
        }
        let x_sub = design.x.select_rows(&rows);
        let y_col = design.y.column(j);
        let y_sub = Matrix::from_fn(rows.len(), 1, |i, _| y_col[rows[i]]);
        let coef =
            solve_least_squares(&x_sub, &y_sub).map_err(|e| lift_linalg(e, Some(ahead)))?;
        for c in 0..m {
            b.set(j, c, coef.get(c, 0));
        }
    }
    Ok(CoefficientSet {
        values: CoefficientValues::Baseline { b },
        column_index: design.column_index.clone(),
        ahead_index: design.ahead_index.clone(),
    })
}

/// Fits the smooth model on fully observed responses by regressing `Y * H`
/// on `X`. Errs with `IncompleteResponses` if any response cell is masked;
/// the weighted fit handles that case.
pub fn fit_smooth(design: &DesignSet, basis: &BasisMatrix) -> Result<CoefficientSet, FitError> {
    check_basis(design, basis)?;
    if !design.is_complete() {
        return Err(FitError::IncompleteResponses);
    }
    let m = design.num_features();
    if design.num_rows() < m {
        return Err(FitError::InsufficientRows {
            ahead: None,
            needed: m,
            got: design.num_rows(),
        });
    }
    let yh = design.y.matmul(basis.h());
    let theta_t = solve_least_squares(&design.x, &yh).map_err(|e| lift_linalg(e, None))?;
    Ok(CoefficientSet {
        values: CoefficientValues::Smooth {
            theta: theta_t.transpose(),
            basis: basis.clone(),
        },
        column_index: design.column_index.clone(),
        ahead_index: design.ahead_index.clone(),
    })
}

/// The rows of the Kronecker system `H (x) X` for the observed response
/// cells, with the matching response entries. Cells are visited in
/// column-stacked order (horizon-major), and column `l*m + c` multiplies
/// `theta[(l, c)]`. Memory is (#observed cells) x (d*m) reals.
pub(crate) fn expanded_observed_system(design: &DesignSet, h: &Matrix) -> (Matrix, Vec<f64>) {
    let n = design.num_rows();
    let q = design.num_aheads();
    let m = design.num_features();
    let d = h.cols();
    let observed = design.observed_cells();
    let mut data = Vec::with_capacity(observed * d * m);
    let mut y = Vec::with_capacity(observed);
    for j in 0..q {
        for r in 0..n {
            if design.w.get(r, j) != 1.0 {
                continue;
            }
            y.push(design.y.get(r, j));
            let x_row = design.x.row(r);
            for l in 0..d {
                let hjl = h.get(j, l);
                for &xc in x_row {
                    data.push(hjl * xc);
                }
            }
        }
    }
    let mat = Matrix::from_vec(y.len(), d * m, data)
        .expect("finite inputs give a finite expanded system");
    (mat, y)
}

/// Fits the smooth model when some response cells are unobserved, by
/// deleting the masked rows of the Kronecker system and solving the
/// remaining plain least-squares problem.
pub fn fit_smooth_weighted(
    design: &DesignSet,
    basis: &BasisMatrix,
) -> Result<CoefficientSet, FitError> {
    check_basis(design, basis)?;
    let m = design.num_features();
    let d = basis.degrees_of_freedom();
    let (xt, yv) = expanded_observed_system(design, basis.h());
    if xt.rows() < d * m {
        return Err(FitError::InsufficientRows {
            ahead: None,
            needed: d * m,
            got: xt.rows(),
        });
    }
    let y = Matrix::column_vector(&yv).expect("responses are finite");
    let theta_vec = solve_least_squares(&xt, &y).map_err(|e| lift_linalg(e, None))?;
    let theta = Matrix::from_fn(d, m, |l, c| theta_vec.get(l * m + c, 0));
    Ok(CoefficientSet {
        values: CoefficientValues::Smooth {
            theta,
            basis: basis.clone(),
        },
        column_index: design.column_index.clone(),
        ahead_index: design.ahead_index.clone(),
    })
}

/// Dispatches to the fast smooth path on complete responses, and to the
/// weighted path otherwise.
pub fn fit_smooth_auto(
    design: &DesignSet,
    basis: &BasisMatrix,
) -> Result<CoefficientSet, FitError> {
    if design.is_complete() {
        fit_smooth(design, basis)
    } else {
        fit_smooth_weighted(design, basis)
    }
}

/// Raw prediction matrix (r x q) for feature rows whose column order
/// matches `coef.column_index`.
pub fn predict_values(coef: &CoefficientSet, x_new: &Matrix) -> Result<Matrix, FitError> {
    if x_new.cols() != coef.num_features() {
        return Err(FitError::ShapeMismatch(format!(
            "features have {} columns, coefficients expect {}",
            x_new.cols(),
            coef.num_features()
        )));
    }
    Ok(match &coef.values {
        CoefficientValues::Baseline { b } => x_new.matmul(&b.transpose()),
        CoefficientValues::Smooth { theta, basis } => x_new
            .matmul(&theta.transpose())
            .matmul(&basis.h().transpose()),
    })
}

/// Predictions labeled by row, one column per horizon.
pub fn predict(
    coef: &CoefficientSet,
    x_new: &Matrix,
    row_index: &[RowKey],
) -> Result<ForecastFrame, FitError> {
    if row_index.len() != x_new.rows() {
        return Err(FitError::ShapeMismatch(format!(
            "{} feature rows but {} row labels",
            x_new.rows(),
            row_index.len()
        )));
    }
    Ok(ForecastFrame {
        row_index: row_index.to_vec(),
        ahead_index: coef.ahead_index.clone(),
        values: predict_values(coef, x_new)?,
    })
}

/// Sum of squared errors over observed cells, per horizon. The total
/// objective is the sum of the entries.
pub fn sse_by_ahead(design: &DesignSet, coef: &CoefficientSet) -> Result<Vec<f64>, FitError> {
    let pred = predict_values(coef, &design.x)?;
    if pred.rows() != design.y.rows() || pred.cols() != design.y.cols() {
        return Err(FitError::ShapeMismatch(
            "prediction and response shapes differ".into(),
        ));
    }
    let mut out = vec![0.0; design.num_aheads()];
    for j in 0..design.num_aheads() {
        for r in 0..design.num_rows() {
            if design.w.get(r, j) == 1.0 {
                let e = design.y.get(r, j) - pred.get(r, j);
                out[j] += e * e;
            }
        }
    }
    Ok(out)
}

/// Total sum of squared errors over observed cells.
pub fn sse_objective(design: &DesignSet, coef: &CoefficientSet) -> Result<f64, FitError> {
    Ok(sse_by_ahead(design, coef)?.iter().sum())
}
