use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, Request, State};
use axum::http::HeaderValue;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Extension, Json, Router};
use chrono::{DateTime, Duration, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use twin_context::{EntityFilter, GeoPoint};
use twin_core::time::{floor_to, parse_rfc3339, rfc3339, Span};
use twin_core::{Observation, SeriesKey};
use twin_models::features::HorizonMode;
use twin_models::runoff::{run_scenario, ScenarioSpec, STREAMFLOW};
use twin_store::RETENTION;

use crate::error::ApiError;
use crate::registry::ModelEntry;
use crate::snapshot::{LoadedGlobal, LoadedRunoff, Snapshot};
use crate::state::ServeState;

/// Carries the snapshot instant on every response.
pub const SNAPSHOT_HEADER: &str = "x-snapshot-loaded-at";

type Snap = Extension<Arc<Snapshot>>;
type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<ServeState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/stations", get(stations))
        .route("/window", get(window))
        .route("/history", get(history))
        .route("/forecast", get(forecast))
        .route("/scenario", post(scenario))
        .route("/entities", get(entities))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .layer(middleware::from_fn_with_state(state, pin_snapshot))
}

pub fn format_instant(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Micros, true)
}

async fn pin_snapshot(State(state): State<Arc<ServeState>>, mut req: Request, next: Next) -> Response {
    let snap = state.snapshot();
    let stamp = HeaderValue::from_str(&format_instant(snap.loaded_at)).expect("ascii timestamp");
    req.extensions_mut().insert(snap);
    let mut resp = next.run(req).await;
    resp.headers_mut().insert(SNAPSHOT_HEADER, stamp);
    resp
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> ApiResult<T> {
    q.map(|Query(v)| v).map_err(|e| ApiError::bad_request(e.body_text()))
}

async fn health(Extension(snap): Snap) -> Json<Value> {
    Json(json!({ "status": "ok", "loaded_at": format_instant(snap.loaded_at) }))
}

#[derive(Serialize)]
struct Latest {
    timestamp: String,
    value: f64,
}

#[derive(Serialize)]
struct VariableOut {
    name: String,
    unit: String,
    latest: Option<Latest>,
}

#[derive(Serialize)]
struct StationOut {
    station_id: String,
    name: String,
    source_id: String,
    latitude: f64,
    longitude: f64,
    variables: Vec<VariableOut>,
}

async fn stations(Extension(snap): Snap) -> Json<Vec<StationOut>> {
    let out = snap
        .catalog
        .stations()
        .map(|(d, s)| StationOut {
            station_id: s.station_id.clone(),
            name: s.name.clone(),
            source_id: d.source_id.clone(),
            latitude: s.latitude,
            longitude: s.longitude,
            variables: d
                .variables
                .iter()
                .map(|v| {
                    let key = SeriesKey::new(&d.source_id, &s.station_id, &v.name, &v.unit);
                    let latest = snap.window.get(&key.id()).and_then(|w| w.observations.last()).map(|o| Latest {
                        timestamp: rfc3339(o.timestamp),
                        value: o.value,
                    });
                    VariableOut {
                        name: v.name.clone(),
                        unit: v.unit.clone(),
                        latest,
                    }
                })
                .collect(),
        })
        .collect();
    Json(out)
}

#[derive(Serialize)]
struct ObsOut {
    timestamp: String,
    value: f64,
    quality: &'static str,
}

fn observations_json(obs: &[Observation]) -> Json<Vec<ObsOut>> {
    Json(
        obs.iter()
            .map(|o| ObsOut {
                timestamp: rfc3339(o.timestamp),
                value: o.value,
                quality: o.quality.as_str(),
            })
            .collect(),
    )
}

fn resolve(snap: &Snapshot, station: &str, variable: &str) -> ApiResult<SeriesKey> {
    snap.resolve(station, variable)?
        .ok_or_else(|| ApiError::not_found(format!("unknown series {station}/{variable}")))
}

#[derive(Deserialize)]
struct WindowQuery {
    station: String,
    variable: String,
    days: Option<i64>,
}

async fn window(Extension(snap): Snap, q: Result<Query<WindowQuery>, QueryRejection>) -> ApiResult<Json<Vec<ObsOut>>> {
    let q = query(q)?;
    let days = q.days.unwrap_or(7);
    let max = RETENTION.as_secs() / 86_400;
    if !(1..=max).contains(&days) {
        return Err(ApiError::bad_request(format!(
            "days must be between 1 and {max}; the window store holds only {max} days"
        )));
    }
    let key = resolve(&snap, &q.station, &q.variable)?;
    let from = snap.loaded_at - Duration::days(days);
    let obs: Vec<Observation> = snap
        .window
        .get(&key.id())
        .map(|w| w.observations.iter().filter(|o| o.timestamp >= from).cloned().collect())
        .unwrap_or_default();
    Ok(observations_json(&obs))
}

#[derive(Deserialize)]
struct HistoryQuery {
    station: String,
    variable: String,
    from: String,
    to: String,
}

async fn history(Extension(snap): Snap, q: Result<Query<HistoryQuery>, QueryRejection>) -> ApiResult<Json<Vec<ObsOut>>> {
    let q = query(q)?;
    let from = parse_rfc3339(&q.from)?;
    let to = parse_rfc3339(&q.to)?;
    if from > to {
        return Err(ApiError::bad_request(format!("from {} is after to {}", q.from, q.to)));
    }
    let key = resolve(&snap, &q.station, &q.variable)?;
    let obs = match snap.history()? {
        Some(h) => h.read(&key, from, to)?,
        None => Vec::new(),
    };
    Ok(observations_json(&obs))
}

#[derive(Deserialize)]
struct ForecastQuery {
    station: String,
    variable: String,
    horizon: Option<usize>,
}

async fn forecast(Extension(snap): Snap, q: Result<Query<ForecastQuery>, QueryRejection>) -> ApiResult<Response> {
    let q = query(q)?;
    let horizon = q.horizon.unwrap_or(1);
    if horizon == 0 {
        return Err(ApiError::bad_request("horizon must be >= 1"));
    }
    let key = resolve(&snap, &q.station, &q.variable)?;
    if q.variable == STREAMFLOW {
        let models: Vec<&LoadedRunoff> = snap.runoff.iter().filter(|m| m.model.meta.station == q.station).collect();
        if !models.is_empty() {
            return runoff_forecast(&snap, &models, horizon);
        }
    }
    let id = key.id();
    let model = snap
        .globals
        .iter()
        .find(|g| g.model.recipe.series_ids.contains(&id))
        .ok_or_else(|| ApiError::not_found(format!("no model registered for {id}")))?;
    global_forecast(&snap, model, &key, horizon)
}

fn not_trained(horizon: usize, available: &[usize]) -> ApiError {
    ApiError::bad_request(format!("horizon {horizon} not trained; available horizons: {available:?}"))
}

fn runoff_forecast(snap: &Snapshot, models: &[&LoadedRunoff], horizon: usize) -> ApiResult<Response> {
    let Some(m) = models.iter().find(|m| m.model.meta.horizon == horizon) else {
        let mut available: Vec<usize> = models.iter().map(|m| m.model.meta.horizon).collect();
        available.sort_unstable();
        return Err(not_trained(horizon, &available));
    };
    let ModelEntry::Runoff { id, metrics, .. } = &m.entry else { unreachable!("runoff list holds runoff entries") };
    let body = snap.cached(&format!("runoff:{id}"), || {
        let (window, origin, newest) = snap.runoff_window(&m.model)?;
        let value = m.model.predict(&window)?;
        Ok(json!({
            "station": m.model.meta.station,
            "variable": STREAMFLOW,
            "horizon": horizon,
            "step": Span::hours(1).to_string(),
            "issued_at": rfc3339(origin),
            "data_until": rfc3339(newest),
            "stale": snap.is_stale(newest),
            "values": [{ "step": horizon, "timestamp": rfc3339(origin + Duration::hours(horizon as i64)), "value": value }],
            "model_id": id,
            "model_kind": "lstm",
            "model_version": m.model.meta.model_version,
            "metrics": metrics,
        }))
    })?;
    Ok(Json(body.as_ref().clone()).into_response())
}

fn key_for_id(snap: &Snapshot, id: &str) -> ApiResult<SeriesKey> {
    if let Some(w) = snap.window.get(id) {
        return Ok(w.key.clone());
    }
    let parts: Vec<&str> = id.splitn(3, '/').collect();
    if let [src, st, var] = parts[..] {
        if let Some(k) = snap.catalog.series_key(src, st, var) {
            return Ok(k);
        }
    }
    Err(ApiError::unprocessable(format!("model input {id} has no data")))
}

fn global_forecast(snap: &Snapshot, g: &LoadedGlobal, key: &SeriesKey, horizon: usize) -> ApiResult<Response> {
    let ModelEntry::Global { id, step, horizons, metrics, candidate, .. } = &g.entry else {
        unreachable!("global list holds global entries")
    };
    let recipe = &g.model.recipe;
    let available: Vec<usize> = match &recipe.mode {
        HorizonMode::Recursive => (1..=horizons.iter().copied().max().unwrap_or(1)).collect(),
        HorizonMode::Direct(h) => h.clone(),
    };
    if !available.contains(&horizon) {
        return Err(not_trained(horizon, &available));
    }
    let series_id = key.id();
    let body = snap.cached(&format!("global:{id}:{series_id}:{horizon}"), || {
        if recipe.layout.n_exog > 0 {
            return Err(ApiError::unprocessable("model needs exogenous forecasts the server does not hold"));
        }
        let keys: Vec<SeriesKey> = recipe.series_ids.iter().map(|s| key_for_id(snap, s)).collect::<ApiResult<_>>()?;
        let newest = keys
            .iter()
            .filter_map(|k| snap.latest(k))
            .max()
            .ok_or_else(|| ApiError::unprocessable(format!("no recent data for the series of model {id}")))?;
        let last = floor_to(newest, *step);
        let len = recipe.layout.lags.max((RETENTION.as_secs() / step.as_secs()) as usize);
        let histories: Vec<Vec<f64>> = keys.iter().map(|k| snap.grid(k, last, *step, len)).collect::<ApiResult<_>>()?;
        let refs: Vec<&[f64]> = histories.iter().map(Vec::as_slice).collect();
        let row = recipe.series_ids.iter().position(|s| *s == series_id).expect("series is in the recipe");
        let at = |s: usize| rfc3339(last + Duration::seconds(step.as_secs() * s as i64));
        let values: Vec<Value> = match &recipe.mode {
            HorizonMode::Recursive => g.model.recursive_forecast(&refs, horizon, &[])?[row]
                .iter()
                .enumerate()
                .map(|(i, v)| json!({ "step": i + 1, "timestamp": at(i + 1), "value": v }))
                .collect(),
            HorizonMode::Direct(trained) => {
                let out = &g.model.direct_forecast(&refs, &[])?[row];
                trained
                    .iter()
                    .zip(out)
                    .filter(|(h, _)| **h <= horizon)
                    .map(|(h, v)| json!({ "step": h, "timestamp": at(*h), "value": v }))
                    .collect()
            }
        };
        let series_newest = snap.latest(key).unwrap_or(newest);
        Ok(json!({
            "station": key.station_id,
            "variable": key.variable,
            "series": series_id,
            "horizon": horizon,
            "step": step.to_string(),
            "issued_at": rfc3339(last),
            "data_until": rfc3339(series_newest),
            "stale": snap.is_stale(series_newest),
            "values": values,
            "model_id": id,
            "model_kind": candidate,
            "model_version": g.version,
            "metrics": metrics,
        }))
    })?;
    Ok(Json(body.as_ref().clone()).into_response())
}

async fn scenario(Extension(snap): Snap, body: Result<Json<ScenarioSpec>, JsonRejection>) -> ApiResult<Json<Value>> {
    let Json(spec) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    evaluate_scenario(&snap, &spec).map(Json)
}

/// Runs a scenario against the snapshot's runoff model for the station and
/// horizon, on the snapshot's latest input window.
pub fn evaluate_scenario(snap: &Snapshot, spec: &ScenarioSpec) -> ApiResult<Value> {
    let models: Vec<&LoadedRunoff> = snap.runoff.iter().filter(|m| m.model.meta.station == spec.station).collect();
    if models.is_empty() {
        return Err(ApiError::not_found(format!("no runoff model for station {}", spec.station)));
    }
    let Some(m) = models.iter().find(|m| m.model.meta.horizon == spec.horizon) else {
        let mut available: Vec<usize> = models.iter().map(|m| m.model.meta.horizon).collect();
        available.sort_unstable();
        return Err(not_trained(spec.horizon, &available));
    };
    spec.validate(&m.model.meta)?;
    let (window, origin, newest) = snap.runoff_window(&m.model)?;
    let result = run_scenario(spec, &m.model, &window)?;
    let mut v = serde_json::to_value(&result).expect("result serializes");
    v["issued_at"] = json!(rfc3339(origin));
    v["stale"] = json!(snap.is_stale(newest));
    Ok(v)
}

#[derive(Deserialize)]
struct EntitiesQuery {
    #[serde(rename = "type")]
    entity_type: Option<String>,
    coords: Option<String>,
    coordinates: Option<String>,
    georel: Option<String>,
    geometry: Option<String>,
    options: Option<String>,
}

/// `near;maxDistance==N` in meters.
fn parse_georel(s: &str) -> ApiResult<f64> {
    let bad = || ApiError::bad_request(format!("unsupported georel '{s}'; expected near;maxDistance==<meters>"));
    let mut parts = s.split(';');
    if parts.next() != Some("near") {
        return Err(bad());
    }
    let mut max = None;
    for p in parts {
        let Some(v) = p.strip_prefix("maxDistance==") else { return Err(bad()) };
        max = Some(v.parse::<f64>().map_err(|_| bad())?);
    }
    max.ok_or_else(bad)
}

async fn entities(Extension(snap): Snap, q: Result<Query<EntitiesQuery>, QueryRejection>) -> ApiResult<Json<Vec<Value>>> {
    let q = query(q)?;
    if let Some(o) = q.options.as_deref() {
        if o != "keyValues" {
            return Err(ApiError::bad_request(format!("options={o} not supported; only keyValues")));
        }
    }
    if let Some(g) = q.geometry.as_deref() {
        if g != "Point" {
            return Err(ApiError::bad_request(format!("geometry={g} not supported; only Point")));
        }
    }
    let near = match (q.georel.as_deref(), q.coords.as_deref().or(q.coordinates.as_deref())) {
        (None, None) => None,
        (Some(rel), Some(c)) => {
            let max = parse_georel(rel)?;
            let at = GeoPoint::parse(c).map_err(|e| ApiError::bad_request(e.to_string()))?;
            Some((at, max))
        }
        _ => return Err(ApiError::bad_request("georel and coordinates must be given together")),
    };
    let filter = EntityFilter {
        entity_type: q.entity_type,
        near,
    };
    let found = snap
        .context
        .query(&filter)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(found.into_iter().map(|e| e.to_key_values()).collect()))
}
