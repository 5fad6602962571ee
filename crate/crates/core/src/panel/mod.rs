//! Long-format panel data with issue ("as of") semantics, and the
//! construction of lagged design matrices from it.
//!
//! A panel row says: `signal` for `geo_id` at `time_value` had `value`,
//! as reported on `issue`. Later issues revise earlier ones; queries filter
//! to issues at or before an `as_of` time and keep the latest survivor.

mod design;
mod time;

pub use design::{
    build_design, build_design_with, split_by_time, ColumnKey, DesignOptions, DesignSet,
    PredictorSpec, RowKey, TaskSpec,
};
pub use time::{format_time, parse_time, Day};

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;
use thiserror::Error;

/// Exact header of a panel CSV (the trailing `issue` column may be omitted).
pub const PANEL_HEADER: [&str; 5] = ["geo_id", "time_value", "signal", "value", "issue"];

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("row {row}: {message}")]
    Parse { row: u64, message: String },
    #[error("row {row}: duplicate record for ({location}, {time}, {variable}, issue {issue})")]
    DuplicateRecord {
        row: u64,
        location: String,
        time: String,
        variable: String,
        issue: String,
    },
    #[error("variable {0:?} does not appear in the panel")]
    UnknownVariable(String),
    #[error("design is empty: {0}")]
    EmptyDesign(String),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One observation: `variable` at (`location`, `time`) had `value`, first
/// reported at `issue`. A missing issue means the value was available at
/// `time` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRecord {
    pub location: String,
    pub time: Day,
    pub variable: String,
    pub value: f64,
    pub issue: Option<Day>,
}

impl PanelRecord {
    /// The time from which this record is visible.
    pub fn effective_issue(&self) -> Day {
        self.issue.unwrap_or(self.time)
    }
}

/// A parsed panel. `dates` records whether time fields were ISO dates, so
/// output can be rendered in the same style.
#[derive(Debug, Clone, Default)]
pub struct PanelDataset {
    pub records: Vec<PanelRecord>,
    pub dates: bool,
}

impl PanelDataset {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }
}

/// Loads a panel CSV from a file.
pub fn load_panel(path: &Path) -> Result<PanelDataset, PanelError> {
    let file = std::fs::File::open(path)?;
    load_panel_reader(file)
}

/// Loads a panel CSV from any reader. The header must match
/// [`PANEL_HEADER`] exactly, except that the `issue` column may be absent.
pub fn load_panel_reader<R: Read>(source: R) -> Result<PanelDataset, PanelError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);

    let headers = reader
        .headers()
        .map_err(|e| PanelError::Parse {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let has_issue = match headers.len() {
        5 if headers.iter().eq(PANEL_HEADER) => true,
        4 if headers.iter().eq(PANEL_HEADER[..4].iter().copied()) => false,
        _ => {
            return Err(PanelError::Parse {
                row: 1,
                message: format!(
                    "header must be {:?} (issue column optional), got {:?}",
                    PANEL_HEADER.join(","),
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            })
        }
    };

    let mut records = Vec::new();
    let mut seen: HashSet<(String, Day, String, Option<Day>)> = HashSet::new();
    let mut dates: Option<bool> = None;
    for row in reader.records() {
        let row = row.map_err(|e| PanelError::Parse {
            row: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let fail = |message: String| PanelError::Parse { row: line, message };

        let location = row[0].to_string();
        if location.is_empty() {
            return Err(fail("empty geo_id".into()));
        }
        let (time, time_is_date) = time::parse_time(&row[1]).map_err(fail)?;
        let variable = row[2].to_string();
        if variable.is_empty() {
            return Err(fail("empty signal".into()));
        }
        let value: f64 = row[3]
            .parse()
            .map_err(|e| fail(format!("bad value {:?}: {e}", &row[3])))?;
        if !value.is_finite() {
            return Err(fail(format!("value {:?} is not finite", &row[3])));
        }
        let issue = if has_issue && !row[4].is_empty() {
            let (d, issue_is_date) = time::parse_time(&row[4]).map_err(fail)?;
            if issue_is_date != time_is_date {
                return Err(fail("issue and time_value use different formats".into()));
            }
            Some(d)
        } else {
            None
        };
        match dates {
            None => dates = Some(time_is_date),
            Some(mode) if mode != time_is_date => {
                return Err(fail("mixing ISO dates and integer times".into()));
            }
            _ => {}
        }
        if !seen.insert((location.clone(), time, variable.clone(), issue)) {
            return Err(PanelError::DuplicateRecord {
                row: line,
                location,
                time: time::format_time(time, dates.unwrap_or(false)),
                variable,
                issue: issue.map_or_else(|| "none".into(), |d| {
                    time::format_time(d, dates.unwrap_or(false))
                }),
            });
        }
        records.push(PanelRecord {
            location,
            time,
            variable,
            value,
            issue,
        });
    }
    Ok(PanelDataset {
        records,
        dates: dates.unwrap_or(false),
    })
}
