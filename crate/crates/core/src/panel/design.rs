//! Turning a panel into regression matrices: one row per (location,
//! forecast time), lagged predictor columns, one response column per
//! horizon, and a 0/1 mask for response cells not yet observed.

use super::{Day, PanelDataset, PanelError};
use crate::linalg::Matrix;
use std::collections::{BTreeMap, BTreeSet};

/// One predictor variable and the lags at which it enters the design.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorSpec {
    pub variable: String,
    pub lags: Vec<Day>,
}

impl PredictorSpec {
    pub fn new(variable: impl Into<String>, lags: Vec<Day>) -> Self {
        Self {
            variable: variable.into(),
            lags,
        }
    }
}

/// What to forecast: the response, the lagged predictors, the horizons, the
/// times to forecast from, and (optionally) the as-of time that limits which
/// issues are visible.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub response: String,
    pub predictors: Vec<PredictorSpec>,
    pub aheads: Vec<Day>,
    pub forecast_times: Vec<Day>,
    pub as_of: Option<Day>,
}

impl TaskSpec {
    /// Total number of feature columns, summed over predictors.
    pub fn num_features(&self) -> usize {
        self.predictors.iter().map(|p| p.lags.len()).sum()
    }

    /// Column keys in design order: predictors in spec order, lags
    /// ascending within each predictor.
    pub fn column_index(&self) -> Vec<ColumnKey> {
        let mut out = Vec::with_capacity(self.num_features());
        for p in &self.predictors {
            let mut lags = p.lags.clone();
            lags.sort_unstable();
            for lag in lags {
                out.push(ColumnKey {
                    variable: p.variable.clone(),
                    lag,
                });
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), PanelError> {
        let bad = |m: String| Err(PanelError::InvalidTask(m));
        if self.response.is_empty() {
            return bad("empty response variable".into());
        }
        if self.aheads.is_empty() {
            return bad("at least one ahead is required".into());
        }
        if !self.aheads.windows(2).all(|w| w[0] < w[1]) {
            return bad("aheads must be strictly increasing".into());
        }
        if self.aheads[0] < 0 {
            return bad("aheads must be non-negative".into());
        }
        if self.num_features() == 0 {
            return bad("at least one predictor lag is required".into());
        }
        for p in &self.predictors {
            if p.variable.is_empty() {
                return bad("empty predictor variable".into());
            }
            let mut sorted = p.lags.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return bad(format!("duplicate lag for predictor {:?}", p.variable));
            }
            if sorted.first().is_some_and(|&l| l < 0) {
                return bad(format!("negative lag for predictor {:?}", p.variable));
            }
        }
        if self.forecast_times.is_empty() {
            return bad("at least one forecast time is required".into());
        }
        if !self.forecast_times.windows(2).all(|w| w[0] < w[1]) {
            return bad("forecast times must be strictly increasing".into());
        }
        Ok(())
    }
}

/// Identifies a design row: where and when the forecast is made from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowKey {
    pub location: String,
    pub time: Day,
}

/// Identifies a design column: which variable, at which lag.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColumnKey {
    pub variable: String,
    pub lag: Day,
}

/// Regression-ready data. `w` flags which response cells are observed:
/// `y[(r, j)]` is meaningful iff `w[(r, j)] == 1`, and is stored as 0
/// otherwise. `x` never has missing entries; candidate rows with a missing
/// predictor are dropped during construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSet {
    pub x: Matrix,
    pub y: Matrix,
    pub w: Matrix,
    pub row_index: Vec<RowKey>,
    pub column_index: Vec<ColumnKey>,
    pub ahead_index: Vec<Day>,
}

impl DesignSet {
    pub fn num_rows(&self) -> usize {
        self.row_index.len()
    }

    pub fn num_features(&self) -> usize {
        self.column_index.len()
    }

    pub fn num_aheads(&self) -> usize {
        self.ahead_index.len()
    }

    /// Number of observed response cells (entries of `w` equal to 1).
    pub fn observed_cells(&self) -> usize {
        self.w.as_slice().iter().filter(|&&v| v == 1.0).count()
    }

    /// True when every response cell is observed.
    pub fn is_complete(&self) -> bool {
        self.w.as_slice().iter().all(|&v| v == 1.0)
    }

    /// New DesignSet containing the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> DesignSet {
        DesignSet {
            x: self.x.select_rows(rows),
            y: self.y.select_rows(rows),
            w: self.w.select_rows(rows),
            row_index: rows.iter().map(|&r| self.row_index[r].clone()).collect(),
            column_index: self.column_index.clone(),
            ahead_index: self.ahead_index.clone(),
        }
    }
}

/// Options for [`build_design_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct DesignOptions {
    /// Keep rows whose responses are all unobserved. Useful at prediction
    /// time, when features exist but no response ever will.
    pub retain_empty: bool,
}

/// Values of one variable keyed by (location, time), each holding the
/// available (issue, value) pairs sorted by issue.
struct VariableHistory<'a> {
    cells: BTreeMap<(&'a str, Day), Vec<(Day, f64)>>,
}

impl<'a> VariableHistory<'a> {
    /// Latest value whose issue is at or before `as_of` (no limit if None).
    fn value_as_of(&self, location: &str, time: Day, as_of: Option<Day>) -> Option<f64> {
        let entries = self.cells.get(&(location, time))?;
        entries
            .iter()
            .rev()
            .find(|(issue, _)| as_of.is_none_or(|cut| *issue <= cut))
            .map(|&(_, v)| v)
    }
}

fn index_by_variable<'a>(panel: &'a PanelDataset) -> BTreeMap<&'a str, VariableHistory<'a>> {
    let mut by_var: BTreeMap<&str, VariableHistory> = BTreeMap::new();
    for rec in &panel.records {
        by_var
            .entry(rec.variable.as_str())
            .or_insert_with(|| VariableHistory {
                cells: BTreeMap::new(),
            })
            .cells
            .entry((rec.location.as_str(), rec.time))
            .or_default()
            .push((rec.effective_issue(), rec.value));
    }
    for hist in by_var.values_mut() {
        for entries in hist.cells.values_mut() {
            entries.sort_unstable_by_key(|&(issue, _)| issue);
        }
    }
    by_var
}

/// Builds the design with default options (all-unobserved rows dropped).
pub fn build_design(panel: &PanelDataset, task: &TaskSpec) -> Result<DesignSet, PanelError> {
    build_design_with(panel, task, DesignOptions::default())
}

/// Builds the design matrices for `task` from `panel`.
///
/// A row is emitted for each (location, forecast time) whose lagged
/// predictors are all visible as of `task.as_of`. Rows are ordered by
/// forecast time, then location. Columns follow [`TaskSpec::column_index`].
pub fn build_design_with(
    panel: &PanelDataset,
    task: &TaskSpec,
    options: DesignOptions,
) -> Result<DesignSet, PanelError> {
    task.validate()?;
    let by_var = index_by_variable(panel);
    for p in &task.predictors {
        if !by_var.contains_key(p.variable.as_str()) {
            return Err(PanelError::UnknownVariable(p.variable.clone()));
        }
    }
    let response = by_var
        .get(task.response.as_str())
        .ok_or_else(|| PanelError::UnknownVariable(task.response.clone()))?;

    let locations: BTreeSet<&str> = panel
        .records
        .iter()
        .map(|r| r.location.as_str())
        .collect();
    let columns = task.column_index();
    let m = columns.len();
    let q = task.aheads.len();

    let mut row_index = Vec::new();
    let mut x_data: Vec<f64> = Vec::new();
    let mut y_data: Vec<f64> = Vec::new();
    let mut w_data: Vec<f64> = Vec::new();
    let mut feature_row = Vec::with_capacity(m);

    for &t in &task.forecast_times {
        for &loc in &locations {
            feature_row.clear();
            let complete = columns.iter().all(|col| {
                let hist = &by_var[col.variable.as_str()];
                match hist.value_as_of(loc, t - col.lag, task.as_of) {
                    Some(v) => {
                        feature_row.push(v);
                        true
                    }
                    None => false,
                }
            });
            if !complete {
                continue;
            }
            let mut any_observed = false;
            let mut y_row = Vec::with_capacity(q);
            let mut w_row = Vec::with_capacity(q);
            for &a in &task.aheads {
                match response.value_as_of(loc, t + a, task.as_of) {
                    Some(v) => {
                        any_observed = true;
                        y_row.push(v);
                        w_row.push(1.0);
                    }
                    None => {
                        y_row.push(0.0);
                        w_row.push(0.0);
                    }
                }
            }
            if !any_observed && !options.retain_empty {
                continue;
            }
            row_index.push(RowKey {
                location: loc.to_string(),
                time: t,
            });
            x_data.extend_from_slice(&feature_row);
            y_data.extend(y_row);
            w_data.extend(w_row);
        }
    }

    if row_index.is_empty() {
        return Err(PanelError::EmptyDesign(
            "no (location, time) pair has complete predictors and any observed response".into(),
        ));
    }
    let n = row_index.len();
    let fin = |rows, cols, data| {
        Matrix::from_vec(rows, cols, data)
            .expect("panel values are finite, so design matrices are finite")
    };
    Ok(DesignSet {
        x: fin(n, m, x_data),
        y: fin(n, q, y_data),
        w: fin(n, q, w_data),
        row_index,
        column_index: columns,
        ahead_index: task.aheads.clone(),
    })
}

/// Splits rows at a forecast-time cutoff: rows at or before `cutoff` go to
/// the first part, later rows to the second. Either part may be empty; the
/// two parts together reconstitute the input.
pub fn split_by_time(design: &DesignSet, cutoff: Day) -> (DesignSet, DesignSet) {
    let (early, late): (Vec<usize>, Vec<usize>) =
        (0..design.num_rows()).partition(|&r| design.row_index[r].time <= cutoff);
    (design.subset(&early), design.subset(&late))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::load_panel_reader;

    fn panel(text: &str) -> PanelDataset {
        load_panel_reader(text.as_bytes()).unwrap()
    }

    /// Panel with `visits` and `cases` for one location over integer days
    /// 0..len, values chosen so every cell is distinct: visits(t) = 100 + t,
    /// cases(t) = 200 + t. Everything finalized immediately (no issue).
    fn simple_panel(len: Day) -> PanelDataset {
        let mut text = String::from("geo_id,time_value,signal,value\n");
        for t in 0..len {
            text.push_str(&format!("ca,{t},visits,{}\n", 100 + t));
            text.push_str(&format!("ca,{t},cases,{}\n", 200 + t));
        }
        panel(&text)
    }

    fn visits_task(forecast_times: Vec<Day>, as_of: Option<Day>) -> TaskSpec {
        TaskSpec {
            response: "cases".into(),
            predictors: vec![PredictorSpec::new("visits", vec![7, 14])],
            aheads: vec![0, 7],
            forecast_times,
            as_of,
        }
    }

    #[test]
    fn lagged_columns_and_ahead_responses_line_up() {
        // Forecasting from day 14 with lags {7, 14} reads visits on days 7
        // and 0; aheads {0, 7} read cases on days 14 and 21.
        let p = simple_panel(22);
        let d = build_design(&p, &visits_task(vec![14], None)).unwrap();
        assert_eq!(d.num_rows(), 1);
        assert_eq!(d.x.row(0), &[107.0, 100.0]);
        assert_eq!(d.y.row(0), &[214.0, 221.0]);
        assert_eq!(d.w.row(0), &[1.0, 1.0]);
        assert_eq!(
            d.column_index,
            vec![
                ColumnKey { variable: "visits".into(), lag: 7 },
                ColumnKey { variable: "visits".into(), lag: 14 },
            ]
        );
        assert_eq!(d.ahead_index, vec![0, 7]);
    }

    #[test]
    fn unreported_future_responses_mask_out() {
        // Only days 0..15 exist, so forecasting from day 14 sees cases at
        // ahead 0 but not ahead 7.
        let p = simple_panel(15);
        let d = build_design(&p, &visits_task(vec![14], None)).unwrap();
        assert_eq!(d.w.row(0), &[1.0, 0.0]);
        assert_eq!(d.y.row(0), &[214.0, 0.0]);
    }

    #[test]
    fn rows_with_missing_predictors_are_dropped() {
        let p = simple_panel(22);
        // Day 13 needs visits on day -1, which does not exist, so only the
        // day-14 row survives.
        let d = build_design(&p, &visits_task(vec![13, 14], None)).unwrap();
        assert_eq!(d.num_rows(), 1);
        assert_eq!(d.row_index[0], RowKey { location: "ca".into(), time: 14 });
        assert!(build_design(&p, &visits_task(vec![3], None)).is_err());
    }

    #[test]
    fn as_of_hides_later_issues() {
        let p = panel(
            "geo_id,time_value,signal,value,issue\n\
             ca,10,visits,1.0,10\n\
             ca,10,visits,99.0,20\n\
             ca,10,cases,5.0,10\n",
        );
        let task = TaskSpec {
            response: "cases".into(),
            predictors: vec![PredictorSpec::new("visits", vec![0])],
            aheads: vec![0],
            forecast_times: vec![10],
            as_of: Some(15),
        };
        let d = build_design(&p, &task).unwrap();
        assert_eq!(d.x.get(0, 0), 1.0);
        let mut later = task.clone();
        later.as_of = Some(25);
        let d2 = build_design(&p, &later).unwrap();
        assert_eq!(d2.x.get(0, 0), 99.0);
        let mut unlimited = task;
        unlimited.as_of = None;
        let d3 = build_design(&p, &unlimited).unwrap();
        assert_eq!(d3.x.get(0, 0), 99.0);
    }

    #[test]
    fn as_of_before_everything_is_empty() {
        let p = panel(
            "geo_id,time_value,signal,value,issue\n\
             ca,10,visits,1.0,10\n\
             ca,10,cases,5.0,10\n",
        );
        let task = TaskSpec {
            response: "cases".into(),
            predictors: vec![PredictorSpec::new("visits", vec![0])],
            aheads: vec![0],
            forecast_times: vec![10],
            as_of: Some(5),
        };
        assert!(matches!(
            build_design(&p, &task),
            Err(PanelError::EmptyDesign(_))
        ));
    }

    #[test]
    fn retain_empty_keeps_unobserved_rows() {
        let p = panel(
            "geo_id,time_value,signal,value,issue\n\
             ca,10,visits,1.0,\n\
             ca,3,cases,5.0,\n",
        );
        let task = TaskSpec {
            response: "cases".into(),
            predictors: vec![PredictorSpec::new("visits", vec![0])],
            aheads: vec![0, 7],
            forecast_times: vec![10],
            as_of: None,
        };
        assert!(build_design(&p, &task).is_err());
        let d = build_design_with(&p, &task, DesignOptions { retain_empty: true }).unwrap();
        assert_eq!(d.num_rows(), 1);
        assert_eq!(d.w.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn unknown_variables_error() {
        let p = simple_panel(22);
        let mut task = visits_task(vec![14], None);
        task.response = "deaths".into();
        assert!(matches!(
            build_design(&p, &task),
            Err(PanelError::UnknownVariable(v)) if v == "deaths"
        ));
        let mut task2 = visits_task(vec![14], None);
        task2.predictors[0].variable = "claims".into();
        assert!(matches!(
            build_design(&p, &task2),
            Err(PanelError::UnknownVariable(v)) if v == "claims"
        ));
    }

    #[test]
    fn lags_sort_ascending_within_predictor() {
        let p = simple_panel(22);
        let mut task = visits_task(vec![14], None);
        task.predictors[0].lags = vec![14, 7];
        let d = build_design(&p, &task).unwrap();
        assert_eq!(d.column_index[0].lag, 7);
        assert_eq!(d.column_index[1].lag, 14);
        assert_eq!(d.x.row(0), &[107.0, 100.0]);
    }

    #[test]
    fn rows_ordered_by_time_then_location() {
        let mut text = String::from("geo_id,time_value,signal,value\n");
        for loc in ["ny", "ca"] {
            for t in 0..10 {
                text.push_str(&format!("{loc},{t},visits,1.0\n"));
                text.push_str(&format!("{loc},{t},cases,2.0\n"));
            }
        }
        let p = panel(&text);
        let task = TaskSpec {
            response: "cases".into(),
            predictors: vec![PredictorSpec::new("visits", vec![1])],
            aheads: vec![0],
            forecast_times: vec![3, 5],
            as_of: None,
        };
        let d = build_design(&p, &task).unwrap();
        let keys: Vec<(String, Day)> = d
            .row_index
            .iter()
            .map(|k| (k.location.clone(), k.time))
            .collect();
        assert_eq!(
            keys,
            vec![
                ("ca".into(), 3),
                ("ny".into(), 3),
                ("ca".into(), 5),
                ("ny".into(), 5),
            ]
        );
    }

    #[test]
    fn split_by_time_partitions_rows() {
        let p = simple_panel(40);
        let task = visits_task((14..30).collect(), None);
        let d = build_design(&p, &task).unwrap();
        let (early, late) = split_by_time(&d, 20);
        assert!(early.row_index.iter().all(|k| k.time <= 20));
        assert!(late.row_index.iter().all(|k| k.time > 20));
        assert_eq!(early.num_rows() + late.num_rows(), d.num_rows());
        let (all, none) = split_by_time(&d, 1000);
        assert_eq!(all.num_rows(), d.num_rows());
        assert_eq!(none.num_rows(), 0);
    }

    #[test]
    fn validates_task() {
        let base = visits_task(vec![14], None);
        let mut bad = base.clone();
        bad.aheads = vec![7, 0];
        assert!(bad.validate().is_err());
        let mut bad = base.clone();
        bad.predictors[0].lags = vec![7, 7];
        assert!(bad.validate().is_err());
        let mut bad = base.clone();
        bad.predictors[0].lags = vec![-1];
        assert!(bad.validate().is_err());
        let mut bad = base;
        bad.forecast_times = vec![];
        assert!(bad.validate().is_err());
    }
}
