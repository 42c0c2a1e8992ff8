//! `sources.json` and `schedule.json`. Schemas are in `docs/config.md`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use twin_core::{Aggregation, DatasetDescriptor, StationMeta, VariableSpec};

use crate::adapter::{FieldMapping, SourceAdapter};
use crate::error::{IngestError, Result};
use crate::fixture::replay_fixture;
use crate::http::HttpPullAdapter;
use crate::schedule::{validate_entries, ScheduleEntry};
use crate::synthetic::{SyntheticAdapter, SyntheticSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdapterConfig {
    Fixture {
        /// Relative paths resolve against the config file's directory.
        path: PathBuf,
        /// Replay speed multiplier; absent means batch mode.
        #[serde(default)]
        speed: Option<f64>,
    },
    Synthetic {
        spec: SyntheticSpec,
    },
    Http {
        url_template: String,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

fn default_timeout() -> u64 {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub source_id: String,
    pub adapter: AdapterConfig,
    /// Overrides the adapter's default field mapping.
    #[serde(default)]
    pub mapping: Option<FieldMapping>,
    /// Registers the source in the catalog when it is not there yet.
    #[serde(default)]
    pub descriptor: Option<DatasetDescriptor>,
}

impl SourceConfig {
    /// The catalog entry to register: the explicit descriptor, or one
    /// derived from a synthetic spec. Other adapters return `None`.
    pub fn catalog_entry(&self) -> Option<DatasetDescriptor> {
        if let Some(d) = &self.descriptor {
            let mut d = d.clone();
            d.source_id = self.source_id.clone();
            return Some(d);
        }
        match &self.adapter {
            AdapterConfig::Synthetic { spec } => Some(DatasetDescriptor {
                source_id: self.source_id.clone(),
                field_area: "synthetic".into(),
                start_date: None,
                variables: spec
                    .variables
                    .iter()
                    .map(|v| VariableSpec::new(&v.variable, &v.unit, Aggregation::Mean))
                    .collect(),
                native_granularity: spec.granularity,
                publish_schedule: "0 0 * * * *".into(),
                stations: spec
                    .stations
                    .iter()
                    .map(|s| StationMeta {
                        source_id: self.source_id.clone(),
                        ..s.clone()
                    })
                    .collect(),
            }),
            _ => None,
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let err = |detail: String| IngestError::Config {
        path: path.display().to_string(),
        detail,
    };
    let body = fs::read(path).map_err(|e| err(e.to_string()))?;
    serde_json::from_slice(&body).map_err(|e| err(e.to_string()))
}

pub fn load_sources(path: &Path) -> Result<Vec<SourceConfig>> {
    read_json(path)
}

pub fn load_schedule(path: &Path) -> Result<Vec<ScheduleEntry>> {
    let entries: Vec<ScheduleEntry> = read_json(path)?;
    validate_entries(&entries, true).map_err(|e| IngestError::Config {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    Ok(entries)
}

pub fn build_adapter(cfg: &SourceConfig, base_dir: &Path) -> Result<Box<dyn SourceAdapter>> {
    let adapter: Box<dyn SourceAdapter> = match &cfg.adapter {
        AdapterConfig::Fixture { path, speed } => {
            let path = if path.is_absolute() { path.clone() } else { base_dir.join(path) };
            let mut a = replay_fixture(&path, speed.unwrap_or(f64::INFINITY))?.with_source_id(&cfg.source_id);
            if let Some(m) = &cfg.mapping {
                a = a.with_mapping(m.clone());
            }
            Box::new(a)
        }
        AdapterConfig::Synthetic { spec } => {
            let mut spec = spec.clone();
            spec.source_id = cfg.source_id.clone();
            Box::new(SyntheticAdapter::new(spec)?)
        }
        AdapterConfig::Http { url_template, timeout_secs } => Box::new(HttpPullAdapter::new(
            &cfg.source_id,
            url_template,
            cfg.mapping.clone().unwrap_or_default(),
            Duration::from_secs(*timeout_secs),
        )?),
    };
    Ok(adapter)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_examples() {
        let sources = r#"[
          {"source_id": "saih-catchments",
           "adapter": {"kind": "fixture", "path": "fixtures/saih-catchments"},
           "mapping": {"caudal": {"variable": "streamflow", "unit": "m3/s", "decimal_comma": true}}},
          {"source_id": "aemet",
           "adapter": {"kind": "http", "url_template": "http://localhost:8081/aemet?from={since}"}}
        ]"#;
        let parsed: Vec<SourceConfig> = serde_json::from_str(sources).unwrap();
        assert_eq!(parsed.len(), 2);
        assert!(parsed[0].mapping.as_ref().unwrap().get("caudal").unwrap().decimal_comma);
        match &parsed[1].adapter {
            AdapterConfig::Http { timeout_secs, .. } => assert_eq!(*timeout_secs, 30),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schedule_requires_compaction_per_source() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("schedule.json");
        fs::write(
            &p,
            r#"[{"source_id": "aemet", "cadence": "0 0 * * * *", "kind": "window_refresh"}]"#,
        )
        .unwrap();
        assert!(matches!(load_schedule(&p), Err(IngestError::Config { .. })));
        fs::write(
            &p,
            r#"[{"source_id": "aemet", "cadence": "0 0 * * * *", "kind": "window_refresh"},
                {"source_id": "aemet", "cadence": "0 0 0 * * Mon", "kind": "weekly_compaction"}]"#,
        )
        .unwrap();
        assert_eq!(load_schedule(&p).unwrap().len(), 2);
    }
}
