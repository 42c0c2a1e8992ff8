use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::time::truncate_secs;

/// Identity of one variable measured at one station of one source.
///
/// `(source_id, station_id, variable)` is globally unique; the unit is
/// fixed for the lifetime of the key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeriesKey {
    pub source_id: String,
    pub station_id: String,
    pub variable: String,
    pub unit: String,
}

impl SeriesKey {
    pub fn new(
        source_id: impl Into<String>,
        station_id: impl Into<String>,
        variable: impl Into<String>,
        unit: impl Into<String>,
    ) -> Self {
        SeriesKey {
            source_id: source_id.into(),
            station_id: station_id.into(),
            variable: variable.into(),
            unit: unit.into(),
        }
    }

    /// `source/station/variable`, the unit-free identity.
    pub fn id(&self) -> String {
        format!("{}/{}/{}", self.source_id, self.station_id, self.variable)
    }

    pub fn same_series(&self, other: &SeriesKey) -> bool {
        self.source_id == other.source_id
            && self.station_id == other.station_id
            && self.variable == other.variable
    }
}

impl fmt::Display for SeriesKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]", self.id(), self.unit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    Measured,
    Imputed,
    Rejected,
}

impl Quality {
    pub fn as_str(self) -> &'static str {
        match self {
            Quality::Measured => "measured",
            Quality::Imputed => "imputed",
            Quality::Rejected => "rejected",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Quality::Measured => 0,
            Quality::Imputed => 1,
            Quality::Rejected => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Quality::Measured),
            1 => Some(Quality::Imputed),
            2 => Some(Quality::Rejected),
            _ => None,
        }
    }
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Quality {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "measured" => Ok(Quality::Measured),
            "imputed" => Ok(Quality::Imputed),
            "rejected" => Ok(Quality::Rejected),
            other => Err(CoreError::usage(format!("unknown quality '{other}'"))),
        }
    }
}

/// One timestamped reading. Missing values are never stored: a gap is the
/// absence of an observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub series: SeriesKey,
    pub timestamp: DateTime<Utc>,
    pub value: f64,
    pub quality: Quality,
    pub ingested_at: DateTime<Utc>,
}

impl Observation {
    /// Validating constructor; timestamps are truncated to whole seconds.
    pub fn new(
        series: SeriesKey,
        timestamp: DateTime<Utc>,
        value: f64,
        quality: Quality,
        ingested_at: DateTime<Utc>,
    ) -> Result<Self> {
        let timestamp = truncate_secs(timestamp);
        let ingested_at = truncate_secs(ingested_at);
        if !value.is_finite() {
            return Err(CoreError::usage(format!(
                "non-finite value for {} at {timestamp}",
                series.id()
            )));
        }
        if timestamp > ingested_at {
            return Err(CoreError::usage(format!(
                "observation at {timestamp} ingested earlier, at {ingested_at}"
            )));
        }
        Ok(Observation {
            series,
            timestamp,
            value,
            quality,
            ingested_at,
        })
    }

    /// A measured reading whose ingestion time equals its timestamp.
    pub fn measured(series: SeriesKey, timestamp: DateTime<Utc>, value: f64) -> Result<Self> {
        Observation::new(series, timestamp, value, Quality::Measured, timestamp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationMeta {
    pub station_id: String,
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
    pub source_id: String,
}

impl StationMeta {
    pub fn validate(&self) -> Result<()> {
        if self.station_id.is_empty() {
            return Err(CoreError::usage("empty station id"));
        }
        if !(-90.0..=90.0).contains(&self.latitude) || !(-180.0..=180.0).contains(&self.longitude)
        {
            return Err(CoreError::usage(format!(
                "station {} has coordinates out of range ({}, {})",
                self.station_id, self.latitude, self.longitude
            )));
        }
        Ok(())
    }
}

/// How readings inside one resampling bucket combine. States (temperature,
/// level) use `mean`; fluxes (precipitation) use `sum`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Last,
    Sum,
}
