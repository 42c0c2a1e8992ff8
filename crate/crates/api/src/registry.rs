//! `models/registry.json`: which model serves which series, with the
//! latest backtest metrics. Model files sit next to it.

use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use twin_core::time::Span;
use twin_core::MetricReport;

/// Backtest metrics of the serving candidate at one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonScore {
    pub horizon: usize,
    pub metrics: MetricReport<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelEntry {
    /// A pooled forecaster (`LGBT` file) covering every series in its recipe.
    Global {
        id: String,
        file: String,
        candidate: String,
        step: Span,
        /// Backtested horizons in steps. Recursive models serve any
        /// horizon up to the largest; direct models exactly these.
        horizons: Vec<usize>,
        #[serde(default)]
        metrics: Vec<HorizonScore>,
        trained_at: DateTime<Utc>,
    },
    /// A streamflow network (`LGLS` file) for one station and horizon in hours.
    Runoff {
        id: String,
        file: String,
        station: String,
        horizon: usize,
        #[serde(default)]
        metrics: Option<MetricReport<f64>>,
        trained_at: DateTime<Utc>,
    },
}

impl ModelEntry {
    pub fn id(&self) -> &str {
        match self {
            ModelEntry::Global { id, .. } | ModelEntry::Runoff { id, .. } => id,
        }
    }

    pub fn file(&self) -> &str {
        match self {
            ModelEntry::Global { file, .. } | ModelEntry::Runoff { file, .. } => file,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub models: Vec<ModelEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed registry {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Registry {
    /// A missing file is an empty registry.
    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let body = match fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Registry::default()),
            Err(source) => {
                return Err(RegistryError::Io {
                    path: path.display().to_string(),
                    source,
                })
            }
        };
        serde_json::from_slice(&body).map_err(|source| RegistryError::Json {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), RegistryError> {
        let io = |source| RegistryError::Io {
            path: path.display().to_string(),
            source,
        };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io)?;
        }
        let tmp = path.with_extension("json.tmp");
        let body = serde_json::to_vec_pretty(self).expect("registry serializes");
        fs::write(&tmp, body).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    /// Replaces the entry with the same id, or appends.
    pub fn upsert(&mut self, entry: ModelEntry) {
        match self.models.iter_mut().find(|m| m.id() == entry.id()) {
            Some(slot) => *slot = entry,
            None => self.models.push(entry),
        }
    }
}
