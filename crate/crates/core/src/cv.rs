//! Degrees-of-freedom selection by cross-validation: fit the smooth model
//! at each candidate basis size, score held-out mean absolute error, and
//! take the smallest size attaining the best mean score.

use crate::basis::{build_basis, BasisError, BasisSpec};
use crate::forecast::{fit_smooth_auto, predict_values, FitError};
use crate::panel::DesignSet;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CvError {
    #[error("invalid cross-validation setup: {0}")]
    Invalid(String),
    #[error("df {df}: {source}")]
    Basis { df: usize, source: BasisError },
    #[error("df {df}, fold {fold}: {source}")]
    Fold {
        df: usize,
        fold: usize,
        source: FitError,
    },
    #[error("fold {fold} has no observed test cells")]
    EmptyFold { fold: usize },
}

/// How rows are grouped into folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvScheme {
    /// Locations (sorted) assigned round-robin; folds mix all times.
    ByLocation,
    /// Times (sorted) cut into contiguous blocks, one block per fold.
    ByTime,
}

/// Default scheme and fold count.
pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_SCHEME: CvScheme = CvScheme::ByLocation;

/// One grid entry: the candidate df, its held-out MAE per fold, and the
/// mean across folds.
#[derive(Debug, Clone, PartialEq)]
pub struct CvRow {
    pub df: usize,
    pub fold_mae: Vec<f64>,
    pub mean_mae: f64,
}

fn fold_assignment(
    design: &DesignSet,
    folds: usize,
    scheme: CvScheme,
) -> Result<Vec<Vec<usize>>, CvError> {
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); folds];
    match scheme {
        CvScheme::ByLocation => {
            let locations: BTreeSet<&str> = design
                .row_index
                .iter()
                .map(|k| k.location.as_str())
                .collect();
            if locations.len() < folds {
                return Err(CvError::Invalid(format!(
                    "{} locations cannot fill {folds} folds",
                    locations.len()
                )));
            }
            let fold_of: std::collections::BTreeMap<&str, usize> = locations
                .iter()
                .enumerate()
                .map(|(i, &loc)| (loc, i % folds))
                .collect();
            for (r, key) in design.row_index.iter().enumerate() {
                groups[fold_of[key.location.as_str()]].push(r);
            }
        }
        CvScheme::ByTime => {
            let times: BTreeSet<i64> = design.row_index.iter().map(|k| k.time).collect();
            if times.len() < folds {
                return Err(CvError::Invalid(format!(
                    "{} distinct times cannot fill {folds} folds",
                    times.len()
                )));
            }
            let times: Vec<i64> = times.into_iter().collect();
            let base = times.len() / folds;
            let extra = times.len() % folds;
            let mut fold_of = std::collections::BTreeMap::new();
            let mut next = 0usize;
            for (f, group) in (0..folds).map(|f| (f, base + usize::from(f < extra))) {
                for _ in 0..group {
                    fold_of.insert(times[next], f);
                    next += 1;
                }
            }
            for (r, key) in design.row_index.iter().enumerate() {
                groups[fold_of[&key.time]].push(r);
            }
        }
    }
    Ok(groups)
}

/// Picks the df with the lowest mean held-out MAE over `folds` folds,
/// breaking ties toward the smaller df. Returns the winner and the full
/// grid table, one row per candidate in ascending order.
pub fn cv_select_df(
    design: &DesignSet,
    df_grid: &[usize],
    folds: usize,
    scheme: CvScheme,
) -> Result<(usize, Vec<CvRow>), CvError> {
    if df_grid.is_empty() {
        return Err(CvError::Invalid("empty df grid".into()));
    }
    if folds < 2 {
        return Err(CvError::Invalid(format!("need at least 2 folds, got {folds}")));
    }
    let mut grid: Vec<usize> = df_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if grid[0] == 0 {
        return Err(CvError::Invalid("df must be at least 1".into()));
    }

    let groups = fold_assignment(design, folds, scheme)?;
    let all_rows: BTreeSet<usize> = (0..design.num_rows()).collect();
    let mut table = Vec::with_capacity(grid.len());
    for &df in &grid {
        let basis = build_basis(&BasisSpec::polynomial(df, design.ahead_index.clone()))
            .map_err(|source| CvError::Basis { df, source })?;
        let mut fold_mae = Vec::with_capacity(folds);
        for (f, test_rows) in groups.iter().enumerate() {
            let test_set: BTreeSet<usize> = test_rows.iter().copied().collect();
            let train_rows: Vec<usize> = all_rows.difference(&test_set).copied().collect();
            let train = design.subset(&train_rows);
            let test = design.subset(test_rows);
            let fit = fit_smooth_auto(&train, &basis)
                .map_err(|source| CvError::Fold { df, fold: f, source })?;
            let pred = predict_values(&fit, &test.x)
                .map_err(|source| CvError::Fold { df, fold: f, source })?;
            let mut abs_sum = 0.0;
            let mut m = 0usize;
            for r in 0..test.num_rows() {
                for j in 0..test.num_aheads() {
                    if test.w.get(r, j) == 1.0 {
                        abs_sum += (test.y.get(r, j) - pred.get(r, j)).abs();
                        m += 1;
                    }
                }
            }
            if m == 0 {
                return Err(CvError::EmptyFold { fold: f });
            }
            fold_mae.push(abs_sum / m as f64);
        }
        let mean_mae = fold_mae.iter().sum::<f64>() / fold_mae.len() as f64;
        table.push(CvRow { df, fold_mae, mean_mae });
    }
    let mut best = &table[0];
    for row in &table[1..] {
        if row.mean_mae < best.mean_mae {
            best = row;
        }
    }
    Ok((best.df, table))
}
