//! Time values in panels: either plain integer indices or ISO-8601 dates.
//! Both are carried internally as an `i64` day index (dates count days from
//! 1970-01-01), so lag and horizon arithmetic is integer arithmetic.

use chrono::NaiveDate;

pub type Day = i64;

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).unwrap()
}

/// Parses a time field. Returns the day index and whether the field was an
/// ISO date (true) or a bare integer (false).
pub fn parse_time(s: &str) -> Result<(Day, bool), String> {
    if let Ok(date) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(((date - epoch()).num_days(), true));
    }
    match s.parse::<i64>() {
        Ok(v) if v >= 0 => Ok((v, false)),
        Ok(v) => Err(format!("integer time value {v} is negative")),
        Err(_) => Err(format!("cannot parse {s:?} as an ISO date or integer")),
    }
}

/// Renders a day index back in the representation the panel used.
pub fn format_time(day: Day, as_date: bool) -> String {
    if as_date {
        (epoch() + chrono::Duration::days(day)).format("%Y-%m-%d").to_string()
    } else {
        day.to_string()
    }
}
