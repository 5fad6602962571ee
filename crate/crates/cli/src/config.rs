//! Task configuration: a TOML file naming the response, the lagged
//! predictors, the horizons, and the forecast dates, so one file drives
//! fit, predict, and evaluate consistently.
//!
//! ```toml
//! response = "cases"
//! aheads = [0, 7]
//! forecast_times = ["2020-12-15", "2020-12-22"]   # or integers
//! as_of = "2021-01-01"                            # optional
//!
//! [[predictors]]
//! variable = "visits"
//! lags = [7, 14]
//! ```
//!
//! Times may be ISO dates (quoted strings or bare TOML dates) or
//! non-negative integers, but not a mix; the choice must match the panel
//! files the config is used with.

use crate::error::CliError;
use mpf_core::panel::{parse_time, Day, PredictorSpec, TaskSpec};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    response: String,
    predictors: Vec<RawPredictor>,
    aheads: Vec<i64>,
    forecast_times: Vec<toml::Value>,
    as_of: Option<toml::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPredictor {
    variable: String,
    lags: Vec<i64>,
}

/// A task plus the time format its dates were written in (`true` for ISO
/// dates); panels used with the task must match.
#[derive(Debug, Clone)]
pub struct TaskConfig {
    pub task: TaskSpec,
    pub dates: bool,
}

fn time_value(v: &toml::Value, what: &str) -> Result<(Day, bool), CliError> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok((*i, false)),
        toml::Value::Integer(i) => Err(CliError::Usage(format!("{what}: negative time {i}"))),
        toml::Value::String(s) => {
            parse_time(s).map_err(|e| CliError::Usage(format!("{what}: {e}")))
        }
        toml::Value::Datetime(d) => {
            parse_time(&d.to_string()).map_err(|e| CliError::Usage(format!("{what}: {e}")))
        }
        other => Err(CliError::Usage(format!(
            "{what}: expected a date or non-negative integer, got {other}"
        ))),
    }
}

/// Parses a time given on the command line (`--as-of`), in either format.
pub fn parse_cli_time(s: &str, what: &str) -> Result<(Day, bool), CliError> {
    parse_time(s).map_err(|e| CliError::Usage(format!("{what}: {e}")))
}

pub fn load_task_config(path: &Path) -> Result<TaskConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let raw: RawConfig = toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;

    let mut dates: Option<bool> = None;
    let mut note_mode = |mode: bool, what: &str| -> Result<(), CliError> {
        match dates {
            None => {
                dates = Some(mode);
                Ok(())
            }
            Some(seen) if seen != mode => Err(CliError::Usage(format!(
                "{what}: mixes ISO dates and integer times"
            ))),
            _ => Ok(()),
        }
    };

    let mut forecast_times = Vec::with_capacity(raw.forecast_times.len());
    for v in &raw.forecast_times {
        let (day, mode) = time_value(v, "forecast_times")?;
        note_mode(mode, "forecast_times")?;
        forecast_times.push(day);
    }
    let as_of = match &raw.as_of {
        Some(v) => {
            let (day, mode) = time_value(v, "as_of")?;
            note_mode(mode, "as_of")?;
            Some(day)
        }
        None => None,
    };

    let task = TaskSpec {
        response: raw.response,
        predictors: raw
            .predictors
            .into_iter()
            .map(|p| PredictorSpec::new(p.variable, p.lags))
            .collect(),
        aheads: raw.aheads,
        forecast_times,
        as_of,
    };
    task.validate()?;
    Ok(TaskConfig {
        task,
        dates: dates.unwrap_or(false),
    })
}
