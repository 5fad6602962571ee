//! Flat-file schemas owned by the CLI: the forecasts table, the metrics
//! table, and the cross-validation table. Times are formatted in the same
//! style (ISO date or integer) as the panel that produced them.

use crate::error::CliError;
use mpf_core::metrics::MetricReport;
use mpf_core::panel::{format_time, parse_time, Day};
use mpf_core::CvRow;
use std::path::Path;

pub const FORECAST_HEADER: [&str; 7] = [
    "geo_id",
    "forecast_time",
    "ahead",
    "quantile",
    "value",
    "lower",
    "upper",
];

/// One forecast cell: the point prediction for (location, time, ahead),
/// which quantile produced it ("mean" when it came from the least-squares
/// model), and the interval bounds when a quantile pair was fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRow {
    pub location: String,
    pub time: Day,
    pub ahead: Day,
    pub quantile: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

pub fn write_forecasts(path: &Path, rows: &[ForecastRow], dates: bool) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(FORECAST_HEADER)?;
    for row in rows {
        w.write_record([
            row.location.as_str(),
            &format_time(row.time, dates),
            &row.ahead.to_string(),
            &row.quantile,
            &row.value.to_string(),
            &row.lower.map(|v| v.to_string()).unwrap_or_default(),
            &row.upper.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(CliError::from)?;
    Ok(())
}

pub fn read_forecasts(path: &Path) -> Result<Vec<ForecastRow>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("cannot read forecasts {}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    if !headers.iter().eq(FORECAST_HEADER) {
        return Err(CliError::Data(format!(
            "forecasts header must be {}, got {}",
            FORECAST_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let fail =
            |message: String| CliError::Data(format!("forecasts row {line}: {message}"));
        let (time, _) = parse_time(&record[1]).map_err(&fail)?;
        let ahead: Day = record[2]
            .parse()
            .map_err(|e| fail(format!("bad ahead {:?}: {e}", &record[2])))?;
        let value: f64 = record[4]
            .parse()
            .map_err(|e| fail(format!("bad value {:?}: {e}", &record[4])))?;
        let optional = |field: &str, name: &str| -> Result<Option<f64>, CliError> {
            if field.is_empty() {
                Ok(None)
            } else {
                field
                    .parse()
                    .map(Some)
                    .map_err(|e| fail(format!("bad {name} {field:?}: {e}")))
            }
        };
        out.push(ForecastRow {
            location: record[0].to_string(),
            time,
            ahead,
            quantile: record[3].to_string(),
            value,
            lower: optional(&record[5], "lower")?,
            upper: optional(&record[6], "upper")?,
        });
    }
    Ok(out)
}

/// Writes `scope,ahead,mae,lmr,umr,m`: one `overall` row, then one `ahead`
/// row per horizon that had observed cells.
pub fn write_metrics(path: &Path, report: &MetricReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scope", "ahead", "mae", "lmr", "umr", "m"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    w.write_record([
        "overall".to_string(),
        String::new(),
        report.mae.to_string(),
        opt(report.lmr),
        opt(report.umr),
        report.m.to_string(),
    ])?;
    for row in &report.per_ahead {
        w.write_record([
            "ahead".to_string(),
            row.ahead.to_string(),
            row.mae.to_string(),
            opt(row.lmr),
            opt(row.umr),
            row.m.to_string(),
        ])?;
    }
    w.flush().map_err(CliError::from)?;
    Ok(())
}

/// Writes `df,fold,mae`: per-fold rows followed by a `mean` row per df.
pub fn write_cv_table(path: &Path, table: &[CvRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["df", "fold", "mae"])?;
    for row in table {
        for (i, mae) in row.fold_mae.iter().enumerate() {
            w.write_record([row.df.to_string(), (i + 1).to_string(), mae.to_string()])?;
        }
        w.write_record([row.df.to_string(), "mean".to_string(), row.mean_mae.to_string()])?;
    }
    w.flush().map_err(CliError::from)?;
    Ok(())
}
