//! An immutable view of everything the handlers read, built in one go and
//! published atomically by [`crate::ServeState`].

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, Utc};
use serde_json::Value;
use thiserror::Error;
use twin_context::ContextStore;
use twin_core::time::{floor_to, Span};
use twin_core::{Catalog, Observation, SeriesKey};
use twin_models::features::{impute_linear, AlignedSeries, Matrix};
use twin_models::learners::{decode_forecaster, GlobalForecaster};
use twin_models::runoff::{decode_runoff, RunoffModel, STREAMFLOW};
use twin_store::{HistoricalStore, WindowStore, RETENTION};

use crate::error::ApiError;
use crate::layout::DataRoot;
use crate::registry::{ModelEntry, Registry, RegistryError};

/// Forecasts are flagged stale when the newest input is older than this
/// relative to the snapshot instant.
pub const STALE_AFTER: Duration = Duration::hours(2);

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Core(#[from] twin_core::CoreError),
    #[error(transparent)]
    Store(#[from] twin_store::StoreError),
    #[error(transparent)]
    Context(#[from] twin_context::ContextError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("model {id}: {source}")]
    Model {
        id: String,
        #[source]
        source: twin_models::ModelError,
    },
    #[error("model file {path}: {source}")]
    ModelFile {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub struct LoadedGlobal {
    pub entry: ModelEntry,
    pub model: GlobalForecaster<f64>,
    /// CRC32 of the model file.
    pub version: String,
}

pub struct LoadedRunoff {
    pub entry: ModelEntry,
    pub model: RunoffModel<f64>,
}

#[derive(Debug, Clone)]
pub struct WindowSeries {
    pub key: SeriesKey,
    /// Sorted by timestamp.
    pub observations: Vec<Observation>,
}

pub struct Snapshot {
    pub loaded_at: DateTime<Utc>,
    pub catalog: Catalog,
    /// Last seven days per series id.
    pub window: BTreeMap<String, WindowSeries>,
    pub globals: Vec<LoadedGlobal>,
    pub runoff: Vec<LoadedRunoff>,
    pub context: ContextStore,
    history_root: Option<PathBuf>,
    forecasts: Mutex<HashMap<String, Arc<Value>>>,
}

impl Snapshot {
    pub fn build(root: &DataRoot, now: DateTime<Utc>) -> Result<Self, BuildError> {
        let catalog = Catalog::load_dir(&root.catalog())?;
        let store = WindowStore::open(root.window())?;
        let from = now - RETENTION.to_chrono();
        let mut window = BTreeMap::new();
        for key in store.series() {
            let observations = store.read(key, from, now)?;
            window.insert(
                key.id(),
                WindowSeries {
                    key: key.clone(),
                    observations,
                },
            );
        }
        let context = ContextStore::open(root.context())?;
        let registry = Registry::load(&root.registry())?;
        let mut globals = Vec::new();
        let mut runoff = Vec::new();
        for entry in registry.models {
            let path = root.models().join(entry.file());
            let bytes = std::fs::read(&path).map_err(|source| BuildError::ModelFile {
                path: path.display().to_string(),
                source,
            })?;
            let id = entry.id().to_string();
            let wrap = |source| BuildError::Model { id, source };
            match entry {
                ModelEntry::Global { .. } => {
                    let model = decode_forecaster(&bytes).map_err(wrap)?;
                    let version = format!("{:08x}", crc32fast::hash(&bytes));
                    globals.push(LoadedGlobal { entry, model, version });
                }
                ModelEntry::Runoff { .. } => {
                    let model = decode_runoff(&bytes).map_err(wrap)?;
                    runoff.push(LoadedRunoff { entry, model });
                }
            }
        }
        Ok(Snapshot {
            loaded_at: now,
            catalog,
            window,
            globals,
            runoff,
            context,
            history_root: Some(root.history()),
            forecasts: Mutex::new(HashMap::new()),
        })
    }

    pub(crate) fn with_loaded_at(mut self, t: DateTime<Utc>) -> Self {
        self.loaded_at = t;
        self
    }

    /// An empty snapshot, served until the first successful build.
    pub fn empty(now: DateTime<Utc>) -> Self {
        Snapshot {
            loaded_at: now,
            catalog: Catalog::new(),
            window: BTreeMap::new(),
            globals: Vec::new(),
            runoff: Vec::new(),
            context: ContextStore::in_memory(),
            history_root: None,
            forecasts: Mutex::new(HashMap::new()),
        }
    }

    pub fn history(&self) -> Result<Option<HistoricalStore>, ApiError> {
        match &self.history_root {
            Some(p) => Ok(Some(HistoricalStore::open(p)?)),
            None => Ok(None),
        }
    }

    /// Resolves `(station, variable)` against the catalog, then the window
    /// cache, then the historical index.
    pub fn resolve(&self, station: &str, variable: &str) -> Result<Option<SeriesKey>, ApiError> {
        if let Some(k) = self.catalog.find_series(station, variable) {
            return Ok(Some(k));
        }
        if let Some(w) = self.window_for(station, variable) {
            return Ok(Some(w.key.clone()));
        }
        let Some(hist) = self.history()? else { return Ok(None) };
        Ok(hist
            .series()
            .into_iter()
            .find(|k| k.station_id == station && k.variable == variable))
    }

    pub fn window_for(&self, station: &str, variable: &str) -> Option<&WindowSeries> {
        self.window
            .values()
            .find(|w| w.key.station_id == station && w.key.variable == variable)
    }

    pub(crate) fn cached(&self, key: &str, compute: impl FnOnce() -> Result<Value, ApiError>) -> Result<Arc<Value>, ApiError> {
        if let Some(v) = self.forecasts.lock().expect("cache lock").get(key) {
            return Ok(v.clone());
        }
        let v = Arc::new(compute()?);
        self.forecasts
            .lock()
            .expect("cache lock")
            .insert(key.to_string(), v.clone());
        Ok(v)
    }

    pub fn is_stale(&self, newest: DateTime<Utc>) -> bool {
        self.loaded_at - newest > STALE_AFTER
    }

    /// Observations of `key` in `[from, to]`: the window cache, plus the
    /// historical store for the part before the cache's first record.
    pub(crate) fn observations(&self, key: &SeriesKey, from: DateTime<Utc>, to: DateTime<Utc>) -> Result<Vec<Observation>, ApiError> {
        let cached: Vec<Observation> = self
            .window
            .get(&key.id())
            .map(|w| w.observations.clone())
            .unwrap_or_default();
        let first = cached.first().map(|o| o.timestamp).unwrap_or(self.loaded_at);
        let mut out = Vec::new();
        if from < first {
            if let Some(hist) = self.history()? {
                let end = (first - Duration::seconds(1)).min(to);
                if from <= end {
                    out = hist.read(key, from, end)?;
                }
            }
        }
        out.extend(cached.into_iter().filter(|o| o.timestamp >= from && o.timestamp <= to));
        Ok(out)
    }

    /// A gap-free grid of `len` buckets ending with the bucket at `last`.
    pub(crate) fn grid(&self, key: &SeriesKey, last: DateTime<Utc>, step: Span, len: usize) -> Result<Vec<f64>, ApiError> {
        let span = Duration::seconds(step.as_secs() * (len as i64 - 1));
        let start = last - span;
        let obs = self.observations(key, start, last + step.to_chrono() - Duration::seconds(1))?;
        let agg = self.catalog.aggregation(key);
        let aligned = AlignedSeries::<f64>::from_observations(key.clone(), &obs, start, step, len, agg)?;
        match aligned.present() {
            0 => Err(ApiError::unprocessable(format!(
                "no data for {} between {} and {}",
                key.id(),
                twin_core::time::rfc3339(start),
                twin_core::time::rfc3339(last)
            ))),
            1 => {
                let v = aligned.values.iter().flatten().next().copied().expect("one present");
                Ok(vec![v; len])
            }
            _ => Ok(impute_linear(&aligned)?.filled().expect("imputed series is gap-free")),
        }
    }

    pub(crate) fn latest(&self, key: &SeriesKey) -> Option<DateTime<Utc>> {
        self.window.get(&key.id())?.observations.last().map(|o| o.timestamp)
    }

    /// Hourly input rows for a runoff model, ending at the bucket of the
    /// newest streamflow reading at the model's station. Returns the window
    /// and that bucket.
    pub(crate) fn runoff_window(&self, model: &RunoffModel<f64>) -> Result<(Matrix<f64>, DateTime<Utc>, DateTime<Utc>), ApiError> {
        let meta = &model.meta;
        let hour = Span::hours(1);
        let target = self
            .window_for(&meta.station, STREAMFLOW)
            .ok_or_else(|| ApiError::unprocessable(format!("no streamflow data for {}", meta.station)))?;
        let newest = target
            .observations
            .last()
            .map(|o| o.timestamp)
            .ok_or_else(|| ApiError::unprocessable(format!("no streamflow data for {}", meta.station)))?;
        let origin = floor_to(newest, hour);
        let mut cols = Vec::with_capacity(meta.columns.len());
        for c in &meta.columns {
            let station = c.name.split('/').next().unwrap_or(&c.name);
            let key = self
                .resolve(station, &c.variable)?
                .ok_or_else(|| ApiError::unprocessable(format!("no series for input column {}", c.name)))?;
            cols.push(self.grid(&key, origin, hour, meta.window)?);
        }
        let mut data = Vec::with_capacity(meta.window * cols.len());
        for i in 0..meta.window {
            data.extend(cols.iter().map(|c| c[i]));
        }
        Ok((Matrix::from_vec(meta.window, cols.len(), data), origin, newest))
    }
}

impl From<twin_core::CoreError> for ApiError {
    fn from(e: twin_core::CoreError) -> Self {
        ApiError::bad_request(e.to_string())
    }
}
