//! UTC time helpers shared across crates.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, TimeZone, Timelike, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CoreError;

/// A whole-second duration written as `<n><unit>` with unit one of
/// `s`, `m`, `h`, `d`, `w` (e.g. `5m`, `1h`, `7d`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span(i64);

impl Span {
    pub const fn seconds(s: i64) -> Self {
        Span(s)
    }
    pub const fn minutes(m: i64) -> Self {
        Span(m * 60)
    }
    pub const fn hours(h: i64) -> Self {
        Span(h * 3600)
    }
    pub const fn days(d: i64) -> Self {
        Span(d * 86_400)
    }

    pub fn as_secs(self) -> i64 {
        self.0
    }

    pub fn to_chrono(self) -> chrono::Duration {
        chrono::Duration::seconds(self.0)
    }
}

impl FromStr for Span {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let split = s
            .find(|c: char| !c.is_ascii_digit())
            .ok_or_else(|| CoreError::usage(format!("duration '{s}' has no unit")))?;
        let (num, unit) = s.split_at(split);
        let n: i64 = num
            .parse()
            .map_err(|_| CoreError::usage(format!("bad duration '{s}'")))?;
        let mult = match unit {
            "s" => 1,
            "m" | "min" => 60,
            "h" => 3600,
            "d" => 86_400,
            "w" => 7 * 86_400,
            _ => return Err(CoreError::usage(format!("unknown duration unit in '{s}'"))),
        };
        Ok(Span(n * mult))
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.0;
        if s != 0 && s % (7 * 86_400) == 0 {
            write!(f, "{}w", s / (7 * 86_400))
        } else if s != 0 && s % 86_400 == 0 {
            write!(f, "{}d", s / 86_400)
        } else if s != 0 && s % 3600 == 0 {
            write!(f, "{}h", s / 3600)
        } else if s != 0 && s % 60 == 0 {
            write!(f, "{}m", s / 60)
        } else {
            write!(f, "{s}s")
        }
    }
}

impl Serialize for Span {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Span {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Drops sub-second precision.
pub fn truncate_secs(t: DateTime<Utc>) -> DateTime<Utc> {
    t.with_nanosecond(0).unwrap_or(t)
}

/// Start of the epoch-aligned bucket of width `step` containing `t`.
pub fn floor_to(t: DateTime<Utc>, step: Span) -> DateTime<Utc> {
    let secs = t.timestamp();
    let g = step.as_secs();
    let start = secs.div_euclid(g) * g;
    Utc.timestamp_opt(start, 0).single().expect("in range")
}

pub fn from_unix(secs: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(secs, 0)
        .single()
        .expect("unix seconds in chrono range")
}

/// RFC3339 with whole seconds and a `Z` suffix, the one timestamp spelling
/// used in files and responses.
pub fn rfc3339(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn parse_rfc3339(s: &str) -> Result<DateTime<Utc>, CoreError> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|t| truncate_secs(t.with_timezone(&Utc)))
        .map_err(|e| CoreError::usage(format!("bad timestamp '{s}': {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn span_parse_and_display() {
        assert_eq!("5m".parse::<Span>().unwrap(), Span::minutes(5));
        assert_eq!("7d".parse::<Span>().unwrap().to_string(), "1w");
        assert_eq!(Span::hours(1).to_string(), "1h");
        assert!("5".parse::<Span>().is_err());
        assert!("5y".parse::<Span>().is_err());
    }

    #[test]
    fn floor_handles_negative_epoch() {
        let t = from_unix(-1);
        assert_eq!(floor_to(t, Span::hours(1)).timestamp(), -3600);
    }

    #[test]
    fn rfc3339_round_trip() {
        let t = parse_rfc3339("2024-06-02T23:55:00Z").unwrap();
        assert_eq!(rfc3339(t), "2024-06-02T23:55:00Z");
        let t = parse_rfc3339("2024-06-03T01:55:00+02:00").unwrap();
        assert_eq!(rfc3339(t), "2024-06-02T23:55:00Z");
    }
}
