use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use twin_core::time::truncate_secs;
use twin_core::{Catalog, Observation, Quality};

use crate::error::Result;

/// One record as the source publishes it, before any interpretation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub station_id: String,
    /// Source-native field name.
    pub field: String,
    pub timestamp: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub source_id: String,
    /// The offending record or line, rendered for humans.
    pub record: String,
    pub reason: String,
}

/// What a poll returns: parseable records plus anything the wrapper could
/// not even split into fields.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawBatch {
    pub records: Vec<RawRecord>,
    pub malformed: Vec<Reject>,
}

impl RawBatch {
    pub fn len(&self) -> usize {
        self.records.len() + self.malformed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub variable: String,
    /// Unit the source publishes in; when absent the catalog unit is taken.
    #[serde(default)]
    pub unit: Option<String>,
    /// Source writes decimals with a comma (`3,14`).
    #[serde(default)]
    pub decimal_comma: bool,
}

/// Source field name to catalog variable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldMapping {
    fields: BTreeMap<String, FieldSpec>,
}

impl FieldMapping {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, field: &str, variable: &str, unit: Option<&str>, decimal_comma: bool) -> Self {
        self.fields.insert(
            field.to_string(),
            FieldSpec {
                variable: variable.to_string(),
                unit: unit.map(str::to_string),
                decimal_comma,
            },
        );
        self
    }

    /// Every field maps to the variable of the same name.
    pub fn identity<'a>(fields: impl IntoIterator<Item = &'a str>) -> Self {
        fields
            .into_iter()
            .fold(Self::new(), |m, f| m.with(f, f, None, false))
    }

    pub fn get(&self, field: &str) -> Option<&FieldSpec> {
        self.fields.get(field)
    }
}

/// The wrapper half of mediator-wrapper: talks to one source and hands
/// back its records untranslated. Polling never modifies the source.
pub trait SourceAdapter: Send {
    fn source_id(&self) -> &str;
    fn mapping(&self) -> &FieldMapping;
    /// Records published after `since`, as visible at `now`.
    fn poll(&mut self, since: DateTime<Utc>, now: DateTime<Utc>) -> Result<RawBatch>;
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Normalized {
    pub observations: Vec<Observation>,
    pub rejects: Vec<Reject>,
}

/// Parses a value string. With `decimal_comma`, a single comma is the
/// decimal separator and dots are not allowed; otherwise commas are not
/// allowed.
pub fn parse_value(raw: &str, decimal_comma: bool) -> Option<f64> {
    let raw = raw.trim();
    let text = if decimal_comma {
        if raw.contains('.') || raw.matches(',').count() > 1 {
            return None;
        }
        raw.replace(',', ".")
    } else {
        if raw.contains(',') {
            return None;
        }
        raw.to_string()
    };
    text.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Accepts RFC3339, or a naive `YYYY-MM-DD[T ]HH:MM:SS` taken as UTC.
pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(truncate_secs(t.with_timezone(&Utc)));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
        .map(|n| truncate_secs(n.and_utc()))
}

/// Polls an adapter and translates its records into observations. A
/// transport failure returns an error and produces no partial output.
pub fn poll_and_normalize(
    adapter: &mut dyn SourceAdapter,
    catalog: &Catalog,
    since: DateTime<Utc>,
    now: DateTime<Utc>,
) -> Result<Normalized> {
    let batch = adapter.poll(since, now)?;
    let source_id = adapter.source_id().to_string();
    let mapping = adapter.mapping();
    let mut out = Normalized {
        observations: Vec::with_capacity(batch.records.len()),
        rejects: batch.malformed,
    };
    for rec in batch.records {
        let reject = |reason: &str| Reject {
            source_id: source_id.clone(),
            record: format!("{}/{}@{}={}", rec.station_id, rec.field, rec.timestamp, rec.value),
            reason: reason.to_string(),
        };
        let Some(spec) = mapping.get(&rec.field) else {
            out.rejects.push(reject("unknown field"));
            continue;
        };
        let Some(key) = catalog.series_key(&source_id, &rec.station_id, &spec.variable) else {
            out.rejects.push(reject("unregistered series"));
            continue;
        };
        if spec.unit.as_ref().is_some_and(|u| *u != key.unit) {
            out.rejects.push(reject("unit mismatch"));
            continue;
        }
        let Some(timestamp) = parse_timestamp(&rec.timestamp) else {
            out.rejects.push(reject("unparseable timestamp"));
            continue;
        };
        if timestamp > now {
            out.rejects.push(reject("future timestamp"));
            continue;
        }
        let Some(value) = parse_value(&rec.value, spec.decimal_comma) else {
            out.rejects.push(reject("unparseable value"));
            continue;
        };
        out.observations
            .push(Observation::new(key, timestamp, value, Quality::Measured, now)?);
    }
    out.observations
        .sort_by(|a, b| (a.series.id(), a.timestamp).cmp(&(b.series.id(), b.timestamp)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::IngestError;
    use twin_core::time::parse_rfc3339;
    use twin_core::{Catalog, DatasetDescriptor, StationMeta};

    struct Scripted {
        mapping: FieldMapping,
        batch: Option<RawBatch>,
        fail: bool,
    }

    impl SourceAdapter for Scripted {
        fn source_id(&self) -> &str {
            "saih-catchments"
        }
        fn mapping(&self) -> &FieldMapping {
            &self.mapping
        }
        fn poll(&mut self, _since: DateTime<Utc>, _now: DateTime<Utc>) -> Result<RawBatch> {
            if self.fail {
                return Err(IngestError::transport("saih-catchments", "connection reset"));
            }
            Ok(self.batch.take().unwrap_or_default())
        }
    }

    fn catalog() -> Catalog {
        let mut d: DatasetDescriptor = Catalog::lagoon().get("saih-catchments").unwrap().clone();
        d.stations.push(StationMeta {
            station_id: "06A01".into(),
            name: "La Puebla".into(),
            latitude: 37.70,
            longitude: -0.95,
            source_id: "saih-catchments".into(),
        });
        let mut c = Catalog::new();
        c.register(d).unwrap();
        c
    }

    fn raw(field: &str, value: &str) -> RawRecord {
        RawRecord {
            station_id: "06A01".into(),
            field: field.into(),
            timestamp: "2024-06-02T10:00:00Z".into(),
            value: value.into(),
        }
    }

    fn now() -> DateTime<Utc> {
        parse_rfc3339("2024-06-02T12:00:00Z").unwrap()
    }

    fn mapping() -> FieldMapping {
        FieldMapping::new()
            .with("caudal", "streamflow", Some("m3/s"), true)
            .with("lluvia", "rain", None, true)
    }

    #[test]
    fn two_known_one_unknown_field() {
        let mut a = Scripted {
            mapping: mapping(),
            batch: Some(RawBatch {
                records: vec![raw("caudal", "1,5"), raw("lluvia", "0,2"), raw("nivel_x", "3")],
                malformed: vec![],
            }),
            fail: false,
        };
        let n = poll_and_normalize(&mut a, &catalog(), now(), now()).unwrap();
        assert_eq!(n.observations.len(), 2);
        assert_eq!(n.rejects.len(), 1);
        assert_eq!(n.rejects[0].reason, "unknown field");
        assert!(n.observations.iter().all(|o| o.ingested_at == now()));
    }

    #[test]
    fn empty_poll() {
        let mut a = Scripted { mapping: mapping(), batch: None, fail: false };
        let n = poll_and_normalize(&mut a, &catalog(), now(), now()).unwrap();
        assert!(n.observations.is_empty() && n.rejects.is_empty());
    }

    #[test]
    fn comma_decimal_is_normalized() {
        let mut a = Scripted {
            mapping: mapping(),
            batch: Some(RawBatch { records: vec![raw("caudal", "3,14")], malformed: vec![] }),
            fail: false,
        };
        let n = poll_and_normalize(&mut a, &catalog(), now(), now()).unwrap();
        assert_eq!(n.observations[0].value, 3.14);
    }

    #[test]
    fn transport_failure_is_retriable() {
        let mut a = Scripted { mapping: mapping(), batch: None, fail: true };
        let err = poll_and_normalize(&mut a, &catalog(), now(), now()).unwrap_err();
        assert!(err.is_retriable());
    }

    #[test]
    fn bad_values_and_times_are_rejected() {
        let mut future = raw("caudal", "1,0");
        future.timestamp = "2024-06-03T00:00:00Z".into();
        let mut garbled = raw("caudal", "1,0");
        garbled.timestamp = "yesterday".into();
        let mut other_station = raw("caudal", "1,0");
        other_station.station_id = "99Z99".into();
        let mut a = Scripted {
            mapping: mapping(),
            batch: Some(RawBatch {
                records: vec![raw("caudal", "n/a"), raw("caudal", "1.5"), future, garbled, other_station],
                malformed: vec![],
            }),
            fail: false,
        };
        let n = poll_and_normalize(&mut a, &catalog(), now(), now()).unwrap();
        let reasons: Vec<_> = n.rejects.iter().map(|r| r.reason.as_str()).collect();
        assert_eq!(
            reasons,
            vec![
                "unparseable value",
                "unparseable value",
                "future timestamp",
                "unparseable timestamp",
                "unregistered series"
            ]
        );
    }

    #[test]
    fn value_parsing_rules() {
        assert_eq!(parse_value("3,14", true), Some(3.14));
        assert_eq!(parse_value("3.14", false), Some(3.14));
        assert_eq!(parse_value("1.003,5", true), None);
        assert_eq!(parse_value("3,14", false), None);
        assert_eq!(parse_value("NaN", false), None);
        assert_eq!(parse_value(" -0,5 ", true), Some(-0.5));
    }

    #[test]
    fn naive_timestamps_are_utc() {
        let t = parse_timestamp("2024-06-02 10:00:00").unwrap();
        assert_eq!(t, parse_rfc3339("2024-06-02T10:00:00Z").unwrap());
    }
}
