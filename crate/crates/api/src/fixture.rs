//! A small, complete data root for tests and demos: two temperature
//! stations with a persistence model, a rain gauge and a streamflow
//! station with runoff networks for 1 h and 6 h, two weeks of history and
//! the reference context entity.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use twin_context::ContextStore;
use twin_core::time::Span;
use twin_core::{Aggregation, Catalog, DatasetDescriptor, MetricReport, Observation, SeriesKey, StationMeta, VariableSpec};
use twin_models::features::{AlignedSeries, LagSpec};
use twin_models::learners::{fit_global, save_forecaster, LearnerSpec};
use twin_models::runoff::{fit_runoff, fixture::linear_response, save_runoff, RunoffDataset, TrainConfig};
use twin_store::{HistoricalStore, WindowStore};

use crate::layout::DataRoot;
use crate::registry::{HorizonScore, ModelEntry, Registry};

pub const WINDOW_HOURS: usize = 168;
pub const RUNOFF_SEED: u64 = 11;

/// What the fixture wrote, for building oracles.
pub struct Demo {
    pub root: DataRoot,
    pub now: DateTime<Utc>,
    pub temperature: BTreeMap<String, SeriesKey>,
    pub streamflow: SeriesKey,
    pub rain: SeriesKey,
    /// The hourly rain/streamflow table written to the window store.
    pub runoff_data: RunoffDataset<f64>,
    pub history_key: SeriesKey,
    pub history_weeks: [String; 2],
}

fn descriptor(source: &str, vars: Vec<VariableSpec>, stations: &[(&str, f64, f64)]) -> DatasetDescriptor {
    DatasetDescriptor {
        source_id: source.into(),
        field_area: "Mar Menor".into(),
        start_date: None,
        variables: vars,
        native_granularity: Span::hours(1),
        publish_schedule: "0 0 * * * *".into(),
        stations: stations
            .iter()
            .map(|(id, lat, lon)| StationMeta {
                station_id: (*id).into(),
                name: format!("station {id}"),
                latitude: *lat,
                longitude: *lon,
                source_id: source.into(),
            })
            .collect(),
    }
}

fn temperature_at(station: usize, t: usize) -> f64 {
    let phase = t as f64 * std::f64::consts::TAU / 24.0;
    18.0 + 2.0 * station as f64 + 3.0 * phase.sin()
}

/// Writes the fixture under `dir`. `now` is the newest reading and should
/// sit on the hour.
pub fn demo_root(dir: &Path, now: DateTime<Utc>) -> Result<Demo, Box<dyn std::error::Error + Send + Sync>> {
    let root = DataRoot::new(dir);
    let mut catalog = Catalog::new();
    catalog.register(descriptor(
        "lab",
        vec![VariableSpec::new("temperature", "degC", Aggregation::Mean)],
        &[("A", 37.70, -0.85), ("B", 37.75, -0.80)],
    ))?;
    catalog.register(descriptor(
        "saih",
        vec![
            VariableSpec::new("streamflow", "m3/s", Aggregation::Mean),
            VariableSpec::new("rain", "mm", Aggregation::Sum),
        ],
        &[("06A01", 37.68, -0.93), ("rg01", 37.72, -0.99)],
    ))?;
    catalog.save_dir(&root.catalog())?;

    let start = now - Duration::hours(WINDOW_HOURS as i64 - 1);
    let hour = |t: usize| start + Duration::hours(t as i64);
    let mut window = WindowStore::open(root.window())?;
    let mut temperature = BTreeMap::new();
    let mut aligned = Vec::new();
    for (i, st) in ["A", "B"].into_iter().enumerate() {
        let key = SeriesKey::new("lab", st, "temperature", "degC");
        let values: Vec<f64> = (0..WINDOW_HOURS).map(|t| temperature_at(i, t)).collect();
        let batch: Vec<Observation> = values
            .iter()
            .enumerate()
            .map(|(t, v)| Observation::measured(key.clone(), hour(t), *v))
            .collect::<Result<_, _>>()?;
        window.append(&batch, now)?;
        aligned.push(AlignedSeries::complete(key.clone(), start, Span::hours(1), &values));
        temperature.insert(st.to_string(), key);
    }

    let runoff_data = linear_response(RUNOFF_SEED, WINDOW_HOURS, 24, start)?;
    let rain = SeriesKey::new("saih", "rg01", "rain", "mm");
    let streamflow = SeriesKey::new("saih", "06A01", "streamflow", "m3/s");
    for (col, key) in [(0, &rain), (1, &streamflow)] {
        let batch: Vec<Observation> = (0..WINDOW_HOURS)
            .map(|t| Observation::measured(key.clone(), hour(t), runoff_data.inputs.get(t, col)))
            .collect::<Result<_, _>>()?;
        window.append(&batch, now)?;
    }

    let history_key = temperature["A"].clone();
    let mut hist = HistoricalStore::open(root.history())?;
    let mut weeks = Vec::new();
    for w in 0..2i64 {
        let week_end = start - Duration::days(7 * (1 - w));
        let week = twin_core::time::rfc3339(week_end);
        let records: Vec<Observation> = (0..7)
            .map(|d| Observation::measured(history_key.clone(), week_end - Duration::days(7 - d), 10.0 + (w * 7 + d) as f64))
            .collect::<Result<_, _>>()?;
        hist.write_segment(&history_key, &week, records)?;
        weeks.push(week);
    }

    let mut ctx = ContextStore::open(root.context())?;
    ctx.upsert_entity(twin_context::fixtures::device_015(), now)?;

    let mut registry = Registry::default();
    let naive = fit_global(&aligned, &[], &LagSpec::recursive(3), &LearnerSpec::Persistence)?;
    save_forecaster(&root.models().join("hourly-temperature.lgbt"), &naive)?;
    registry.upsert(ModelEntry::Global {
        id: "hourly-temperature".into(),
        file: "hourly-temperature.lgbt".into(),
        candidate: "naive".into(),
        step: Span::hours(1),
        horizons: vec![1, 6, 12, 24],
        metrics: [1, 6, 12, 24]
            .into_iter()
            .map(|h| HorizonScore {
                horizon: h,
                metrics: MetricReport { mae: 0.1 * h as f64, cvrmse: Some(h as f64), n: 10 },
            })
            .collect(),
        trained_at: now,
    });
    let cfg = TrainConfig {
        epochs: 3,
        ..TrainConfig::toy()
    };
    for h in [1, 6] {
        let mut ds = runoff_data.clone();
        ds.horizon = h;
        let (model, report) = fit_runoff(&ds, &cfg)?;
        let id = format!("runoff-06A01-h{h}");
        let file = format!("{id}.lgls");
        save_runoff(&root.models().join(&file), &model)?;
        registry.upsert(ModelEntry::Runoff {
            id,
            file,
            station: "06A01".into(),
            horizon: h,
            metrics: Some(report.test),
            trained_at: now,
        });
    }
    registry.save(&root.registry())?;

    Ok(Demo {
        root,
        now,
        temperature,
        streamflow,
        rain,
        runoff_data,
        history_key,
        history_weeks: [weeks[0].clone(), weeks[1].clone()],
    })
}
