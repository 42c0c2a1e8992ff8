use chrono::{DateTime, Utc};
use serde_json::{json, Value};
use twin_core::time::rfc3339;
use twin_core::{Observation, Quality, SeriesKey, StationMeta};

use crate::entity::{ContextEntity, URN_PREFIX};
use crate::error::{ContextError, Result};
use crate::geo::GeoPoint;
use crate::store::ContextStore;

/// One `Device` per (source, station).
pub fn device_id(source_id: &str, station_id: &str) -> String {
    format!("{URN_PREFIX}Device:{source_id}:{station_id}")
}

/// Ensures the station's Device exists, adds the series' variable to its
/// `controlledProperty`, records each observation as a point on the
/// attribute named after the variable, and advances
/// `dateLastValueReported`. Rejected-quality records are skipped. The
/// device update is stamped with the newest observation time. Returns the
/// number of points written.
pub fn wrap_observations(
    store: &mut ContextStore,
    series: &SeriesKey,
    station: &StationMeta,
    batch: &[Observation],
) -> Result<usize> {
    if station.station_id != series.station_id {
        return Err(ContextError::Usage(format!(
            "station {} does not own series {}",
            station.station_id,
            series.id()
        )));
    }
    if let Some(o) = batch.iter().find(|o| !o.series.same_series(series)) {
        return Err(ContextError::Usage(format!(
            "observation of {} in a batch for {}",
            o.series.id(),
            series.id()
        )));
    }
    let points: Vec<&Observation> = batch.iter().filter(|o| o.quality != Quality::Rejected).collect();
    let Some(newest) = points.iter().map(|o| o.timestamp).max() else {
        return Ok(0);
    };
    let id = device_id(&series.source_id, &series.station_id);
    let device = updated_device(store.get(&id), &id, series, station, newest)?;
    store.batch(|s| {
        s.upsert_entity_unflushed(device, newest)?;
        for o in &points {
            s.append_inner(&id, &series.variable, o.timestamp, json!(o.value))?;
        }
        Ok(points.len())
    })
}

fn updated_device(
    current: Option<&ContextEntity>,
    id: &str,
    series: &SeriesKey,
    station: &StationMeta,
    newest: DateTime<Utc>,
) -> Result<ContextEntity> {
    let mut device = match current {
        Some(e) => e.clone(),
        None => {
            let mut e = ContextEntity::new(id)?
                .with_property("name", json!(station.name))
                .with_property("deviceCategory", json!("sensor"))
                .with_property("source", json!(series.source_id))
                .with_property("controlledProperty", json!([]));
            if let Ok(p) = GeoPoint::new(station.latitude, station.longitude) {
                e = e.with_location(p);
            }
            e
        }
    };
    let mut controlled: Vec<String> = device
        .properties
        .get("controlledProperty")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
        .unwrap_or_default();
    if !controlled.contains(&series.variable) {
        controlled.push(series.variable.clone());
    }
    device
        .properties
        .insert("controlledProperty".into(), json!(controlled));

    let last = device
        .properties
        .get("dateLastValueReported")
        .and_then(Value::as_str)
        .and_then(|s| twin_core::time::parse_rfc3339(s).ok());
    if last.is_none_or(|l| newest > l) {
        device
            .properties
            .insert("dateLastValueReported".into(), json!(rfc3339(newest)));
    }
    Ok(device)
}
