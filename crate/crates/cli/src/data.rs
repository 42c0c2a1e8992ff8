//! Reading stored series back as model inputs.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use twin_api::DataRoot;
use twin_core::time::{floor_to, Span};
use twin_core::{Catalog, Observation, SeriesKey};
use twin_models::features::{drop_sparse, impute_linear, AlignedSeries, Matrix};
use twin_models::runoff::{InputColumn, RunoffDataset, EXOGENOUS_VARIABLES, STREAMFLOW};
use twin_store::{HistoricalStore, WindowStore};

use crate::error::{CliError, CliResult};

pub struct Stores {
    pub catalog: Catalog,
    pub window: WindowStore,
    pub history: HistoricalStore,
}

/// `source/station/variable`.
pub fn parse_target(s: &str) -> CliResult<(String, String, String)> {
    let parts: Vec<&str> = s.split('/').collect();
    match parts[..] {
        [src, st, var] if !src.is_empty() && !st.is_empty() && !var.is_empty() => {
            Ok((src.to_string(), st.to_string(), var.to_string()))
        }
        _ => Err(CliError::usage(format!("target must be source/station/variable, got '{s}'"))),
    }
}

impl Stores {
    pub fn open(root: &DataRoot) -> CliResult<Self> {
        Ok(Stores {
            catalog: Catalog::load_dir(&root.catalog())?,
            window: WindowStore::open(root.window())?,
            history: HistoricalStore::open(root.history())?,
        })
    }

    /// Every series holding data in either store, by id.
    pub fn series_with_data(&self) -> BTreeMap<String, SeriesKey> {
        let mut out: BTreeMap<String, SeriesKey> = self.history.series().into_iter().map(|k| (k.id(), k)).collect();
        for k in self.window.series() {
            out.insert(k.id(), k.clone());
        }
        out
    }

    pub fn resolve_target(&self, target: &str) -> CliResult<SeriesKey> {
        let (src, st, var) = parse_target(target)?;
        let id = format!("{src}/{st}/{var}");
        self.series_with_data()
            .remove(&id)
            .or_else(|| self.catalog.series_key(&src, &st, &var))
            .ok_or_else(|| CliError::usage(format!("unknown target {id}: not in the catalog and no stored data")))
    }

    /// Series of the same source and variable that hold data, the target
    /// included, sorted by id.
    pub fn peers(&self, key: &SeriesKey) -> Vec<SeriesKey> {
        let mut peers: Vec<SeriesKey> = self
            .series_with_data()
            .into_values()
            .filter(|k| k.source_id == key.source_id && k.variable == key.variable)
            .collect();
        if !peers.iter().any(|k| k.same_series(key)) {
            peers.push(key.clone());
            peers.sort();
        }
        peers
    }

    /// Historical records followed by window records; on a shared
    /// timestamp the window copy wins.
    pub fn observations(&self, key: &SeriesKey) -> CliResult<Vec<Observation>> {
        let (lo, hi) = (DateTime::<Utc>::MIN_UTC, DateTime::<Utc>::MAX_UTC);
        let mut by_ts: BTreeMap<i64, Observation> = BTreeMap::new();
        for o in self.history.read(key, lo, hi)?.into_iter().chain(self.window.read(key, lo, hi)?) {
            by_ts.insert(o.timestamp.timestamp(), o);
        }
        Ok(by_ts.into_values().collect())
    }

    /// Resamples `keys` onto one grid spanning all of their data.
    pub fn aligned(&self, keys: &[SeriesKey], step: Span) -> CliResult<Vec<AlignedSeries<f64>>> {
        let obs: Vec<Vec<Observation>> = keys.iter().map(|k| self.observations(k)).collect::<CliResult<_>>()?;
        let first = obs.iter().filter_map(|o| o.first()).map(|o| o.timestamp).min();
        let last = obs.iter().filter_map(|o| o.last()).map(|o| o.timestamp).max();
        let (Some(first), Some(last)) = (first, last) else {
            return Err(CliError::usage("no stored data for the requested series"));
        };
        let start = floor_to(first, step);
        let len = ((floor_to(last, step) - start).num_seconds() / step.as_secs()) as usize + 1;
        keys.iter()
            .zip(&obs)
            .map(|(k, o)| {
                Ok(AlignedSeries::from_observations(k.clone(), o, start, step, len, self.catalog.aggregation(k))?)
            })
            .collect()
    }

    /// Hourly inputs for a streamflow target: the target's streamflow
    /// first, other streamflow stations, rain gauges, then weather
    /// forecasts. Columns missing more than half the target's span are
    /// left out; remaining gaps are interpolated.
    pub fn runoff_dataset(&self, target: &SeriesKey, horizon: usize, window: usize) -> CliResult<RunoffDataset<f64>> {
        if target.variable != STREAMFLOW {
            return Err(CliError::usage(format!("lstm models predict {STREAMFLOW}, not {}", target.variable)));
        }
        let hour = Span::hours(1);
        let target_obs = self.observations(target)?;
        let (Some(first), Some(last)) = (target_obs.first(), target_obs.last()) else {
            return Err(CliError::usage(format!("no stored data for {}", target.id())));
        };
        let start = floor_to(first.timestamp, hour);
        let len = ((floor_to(last.timestamp, hour) - start).num_hours()) as usize + 1;

        let mut variables = vec![STREAMFLOW];
        variables.extend(EXOGENOUS_VARIABLES);
        let mut seen = BTreeSet::new();
        let mut keys = vec![target.clone()];
        seen.insert((target.station_id.clone(), target.variable.clone()));
        for var in variables {
            for k in self.series_with_data().into_values().filter(|k| k.variable == var) {
                if seen.insert((k.station_id.clone(), k.variable.clone())) {
                    keys.push(k);
                }
            }
        }
        let mut aligned = Vec::with_capacity(keys.len());
        for k in &keys {
            let obs = self.observations(k)?;
            aligned.push(AlignedSeries::<f64>::from_observations(k.clone(), &obs, start, hour, len, self.catalog.aggregation(k))?);
        }
        let target_series = aligned.remove(0);
        if target_series.missing_fraction() > 0.5 {
            return Err(CliError::usage(format!("{} is missing more than half its hours", target.id())));
        }
        let (kept, dropped) = drop_sparse(aligned, 0.5);
        for d in dropped {
            tracing::warn!(series = %d.series, "left out of the runoff inputs: too sparse");
        }
        let mut cols = vec![impute_linear(&target_series)?];
        for s in &kept {
            cols.push(impute_linear(s)?);
        }
        let columns: Vec<InputColumn> = cols
            .iter()
            .map(|s| InputColumn::new(format!("{}/{}", s.key.station_id, s.key.variable), &s.key.variable))
            .collect();
        let filled: Vec<Vec<f64>> = cols.iter().map(|s| s.filled().expect("imputed")).collect();
        let mut data = Vec::with_capacity(len * filled.len());
        for t in 0..len {
            data.extend(filled.iter().map(|c| c[t]));
        }
        let times = (0..len).map(|t| cols[0].time_at(t)).collect();
        Ok(RunoffDataset::new(
            &target.station_id,
            horizon,
            window,
            columns,
            Matrix::from_vec(len, filled.len(), data),
            filled[0].clone(),
            times,
        )?)
    }
}
