//! Cell values shared by raw data, transformed views, and snapshot tables.

use std::cmp::Ordering;
use std::fmt;

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

/// Declared data type of a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldType {
    Quantitative,
    Nominal,
    Temporal,
}

impl FieldType {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldType::Quantitative => "quantitative",
            FieldType::Nominal => "nominal",
            FieldType::Temporal => "temporal",
        }
    }
}

/// A named, typed column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    #[serde(rename = "type")]
    pub field_type: FieldType,
}

impl Field {
    pub fn new(name: impl Into<String>, field_type: FieldType) -> Self {
        Field {
            name: name.into(),
            field_type,
        }
    }
}

/// A single cell.
///
/// Timestamps are stored as milliseconds since the Unix epoch (UTC). Numbers
/// are always finite; text is never empty (empty cells are `Null`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum DataValue {
    Number(f64),
    Text(String),
    Timestamp(i64),
    Null,
}

impl DataValue {
    /// Builds a number, mapping non-finite input to `Null`.
    pub fn number(v: f64) -> Self {
        if v.is_finite() {
            DataValue::Number(v)
        } else {
            DataValue::Null
        }
    }

    /// Builds a text value, mapping the empty string to `Null`.
    pub fn text(s: impl Into<String>) -> Self {
        let s = s.into();
        if s.is_empty() {
            DataValue::Null
        } else {
            DataValue::Text(s)
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, DataValue::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            DataValue::Number(v) => Some(*v),
            DataValue::Timestamp(ms) => Some(*ms as f64),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            DataValue::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Parses a raw cell according to a declared type. Empty input is `Null`.
    pub fn parse_as(raw: &str, field_type: FieldType) -> Option<DataValue> {
        let raw = raw.trim();
        if raw.is_empty() {
            return Some(DataValue::Null);
        }
        match field_type {
            FieldType::Quantitative => raw.parse::<f64>().ok().filter(|v| v.is_finite()).map(DataValue::Number),
            FieldType::Nominal => Some(DataValue::Text(raw.to_string())),
            FieldType::Temporal => parse_timestamp(raw).map(DataValue::Timestamp),
        }
    }

    /// Total order used by sorting: numbers and timestamps numerically, text
    /// lexicographically, mixed kinds by kind rank. Nulls compare greater than
    /// everything so they land last in ascending order.
    pub fn sort_cmp(&self, other: &DataValue) -> Ordering {
        fn rank(v: &DataValue) -> u8 {
            match v {
                DataValue::Number(_) => 0,
                DataValue::Timestamp(_) => 1,
                DataValue::Text(_) => 2,
                DataValue::Null => 3,
            }
        }
        match (self, other) {
            (DataValue::Number(a), DataValue::Number(b)) => a.total_cmp(b),
            (DataValue::Timestamp(a), DataValue::Timestamp(b)) => a.cmp(b),
            (DataValue::Text(a), DataValue::Text(b)) => a.cmp(b),
            _ => rank(self).cmp(&rank(other)),
        }
    }

    /// Text used inside CSV cells. Null renders as an empty cell.
    pub fn to_cell(&self) -> String {
        match self {
            DataValue::Null => String::new(),
            other => other.to_string(),
        }
    }
}

impl fmt::Display for DataValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataValue::Number(v) => f.write_str(&format_number(*v)),
            DataValue::Text(s) => f.write_str(s),
            DataValue::Timestamp(ms) => f.write_str(&format_timestamp(*ms)),
            DataValue::Null => f.write_str("null"),
        }
    }
}

/// Shortest round-tripping rendering; integral values print without a
/// fractional part.
pub fn format_number(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// `YYYY-MM-DD` for midnight UTC, RFC 3339 with milliseconds otherwise.
pub fn format_timestamp(ms: i64) -> String {
    match DateTime::<Utc>::from_timestamp_millis(ms) {
        Some(dt) if dt.time() == chrono::NaiveTime::MIN => dt.format("%Y-%m-%d").to_string(),
        Some(dt) => dt.to_rfc3339_opts(SecondsFormat::Millis, true),
        None => ms.to_string(),
    }
}

/// Accepts `YYYY`, `YYYY-MM`, `YYYY-MM-DD`, `YYYY-MM-DD HH:MM:SS`, and RFC 3339.
pub fn parse_timestamp(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.timestamp_millis());
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S") {
        return Some(dt.and_utc().timestamp_millis());
    }
    if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return Some(d.and_time(chrono::NaiveTime::MIN).and_utc().timestamp_millis());
    }
    if let Ok(d) = NaiveDate::parse_from_str(&format!("{raw}-01"), "%Y-%m-%d") {
        if raw.len() == 7 {
            return Some(d.and_time(chrono::NaiveTime::MIN).and_utc().timestamp_millis());
        }
    }
    if raw.len() == 4 && raw.bytes().all(|b| b.is_ascii_digit()) {
        let year: i32 = raw.parse().ok()?;
        let d = NaiveDate::from_ymd_opt(year, 1, 1)?;
        return Some(d.and_time(chrono::NaiveTime::MIN).and_utc().timestamp_millis());
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_render_without_trailing_zero() {
        assert_eq!(format_number(1400000.0), "1400000");
        assert_eq!(format_number(0.98), "0.98");
        assert_eq!(format_number(-0.5), "-0.5");
    }

    #[test]
    fn timestamps_round_trip_through_text() {
        for raw in ["2017-01-01", "2020-02-29", "1999-12-31T23:59:59.123Z"] {
            let ms = parse_timestamp(raw).unwrap();
            assert_eq!(parse_timestamp(&format_timestamp(ms)), Some(ms), "{raw}");
        }
        assert_eq!(parse_timestamp("2017"), parse_timestamp("2017-01-01"));
        assert_eq!(parse_timestamp("2017-03"), parse_timestamp("2017-03-01"));
        assert_eq!(parse_timestamp("soon"), None);
    }

    #[test]
    fn nulls_sort_after_everything() {
        let null = DataValue::Null;
        assert_eq!(DataValue::Number(1e9).sort_cmp(&null), Ordering::Less);
        assert_eq!(DataValue::text("zzz").sort_cmp(&null), Ordering::Less);
        assert_eq!(DataValue::Number(2.0).sort_cmp(&DataValue::Number(10.0)), Ordering::Less);
    }

    #[test]
    fn empty_text_and_nan_become_null() {
        assert!(DataValue::text("").is_null());
        assert!(DataValue::number(f64::NAN).is_null());
        assert_eq!(DataValue::parse_as("  ", FieldType::Quantitative), Some(DataValue::Null));
        assert_eq!(DataValue::parse_as("abc", FieldType::Quantitative), None);
    }
}
