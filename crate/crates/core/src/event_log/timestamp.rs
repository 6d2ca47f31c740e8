use chrono::{DateTime, DurationRound, FixedOffset, NaiveDate, NaiveDateTime, TimeDelta};

use super::Timestamp;

const NAIVE_FORMATS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];

fn utc() -> FixedOffset {
    FixedOffset::east_opt(0).expect("zero offset is valid")
}

fn to_millis(ts: Timestamp) -> Timestamp {
    ts.duration_trunc(TimeDelta::milliseconds(1)).unwrap_or(ts)
}

/// Parse an ISO-8601 timestamp. An explicit offset is kept; a naive value is
/// interpreted as UTC. Sub-millisecond digits are truncated.
pub fn parse_timestamp(value: &str) -> Option<Timestamp> {
    let value = value.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(value) {
        return Some(to_millis(ts));
    }
    // Offsets without a colon, e.g. +0100.
    if let Ok(ts) = DateTime::parse_from_str(value, "%Y-%m-%dT%H:%M:%S%.f%z") {
        return Some(to_millis(ts));
    }
    for fmt in NAIVE_FORMATS {
        if let Ok(naive) = NaiveDateTime::parse_from_str(value, fmt) {
            return Some(to_millis(naive.and_utc().with_timezone(&utc())));
        }
    }
    NaiveDate::parse_from_str(value, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|n| n.and_utc().with_timezone(&utc()))
}

/// Parse with an explicit chrono format string; formats without an offset
/// specifier produce UTC instants.
pub(crate) fn parse_timestamp_with(value: &str, format: &str) -> Option<Timestamp> {
    let value = value.trim();
    if let Ok(ts) = DateTime::parse_from_str(value, format) {
        return Some(to_millis(ts));
    }
    if let Ok(naive) = NaiveDateTime::parse_from_str(value, format) {
        return Some(to_millis(naive.and_utc().with_timezone(&utc())));
    }
    NaiveDate::parse_from_str(value, format)
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|n| n.and_utc().with_timezone(&utc()))
}
