//! One PASS/FAIL line per acceptance criterion, with wall time. Runs
//! without the libtest harness so the lines always reach stdout.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration as StdDuration, Instant};

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use twin_api::fixture::demo_root;
use twin_api::{ServeState, SNAPSHOT_HEADER};
use twin_context::{ContextEntity, ContextStore, EntityFilter, GeoPoint};
use twin_core::metrics::{cvrmse, mae, MetricReport};
use twin_core::time::Span;
use twin_core::{Aggregation, Observation, Quality, SeriesKey, StationMeta};
use twin_ingest::{synthesize, SyntheticSpec, SyntheticVariable};
use twin_models::features::{AlignedSeries, Matrix};
use twin_models::learners::{fit_gbrt, fit_tree, search, GbrtParams, HyperParams, SearchSpace, TreeParams};
use twin_models::pipeline::{run_pipeline, PipelineConfig, Regime};
use twin_models::runoff::fixture::{linear_response, synthetic_catchment};
use twin_models::runoff::{
    clamp_nonnegative, fit_runoff, gradient_check, param_count, predict_streamflow, LstmNetwork, RunoffMeta, Scalers,
    TrainConfig, DENSE1, DENSE2,
};
use twin_store::segment::{decode, encode, SegmentRecord};
use twin_store::{compact, HistoricalStore, StoreError, ValidationRules, WindowStore};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
}

// 1. Metrics against direct recomputation.

fn metric_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let n = rng.random_range(1..=64);
        let actual: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..100.0)).collect();
        let predicted: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..110.0)).collect();
        let mut abs_sum = 0.0;
        let mut sq_sum = 0.0;
        let mut act_sum = 0.0;
        for k in 0..n {
            let d = actual[k] - predicted[k];
            abs_sum += d.abs();
            sq_sum += d * d;
            act_sum += actual[k];
        }
        let want_mae = abs_sum / n as f64;
        let want_cv = 100.0 * (sq_sum / n as f64).sqrt() / (act_sum / n as f64);
        let got_mae = mae(&actual, &predicted).map_err(|e| e.to_string())?;
        let got_cv = cvrmse(&actual, &predicted).map_err(|e| e.to_string())?.ok_or("cvrmse absent")?;
        worst = worst.max(rel(got_mae, want_mae)).max(rel(got_cv, want_cv));
        check(worst <= 1e-12, || format!("vector {i}: relative error {worst:e}"))?;
    }
    let cv: f64 = cvrmse(&[2.0, 4.0], &[3.0, 3.0]).unwrap().unwrap();
    check((cv - 100.0 / 3.0).abs() <= 1e-12, || format!("cvrmse([2,4],[3,3]) = {cv}"))?;
    let zero: Option<f64> = cvrmse(&[-1.0, 1.0], &[0.0, 0.0]).unwrap();
    check(zero.is_none(), || format!("zero-mean cvrmse = {zero:?}"))?;
    let report: MetricReport<f64> = MetricReport::evaluate(&[-2.0, 2.0], &[0.0, 0.0]).unwrap();
    check(report.cvrmse.is_none() && report.mae == 2.0, || format!("{report:?}"))?;
    Ok(format!("1000 vectors, worst relative error {worst:.1e}; cvrmse([2,4],[3,3]) = {cv:.6}"))
}

// 2. Regression tree against exhaustive enumeration.

struct TreeData {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
}

fn sse(idx: &[usize], d: &TreeData) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let mean = idx.iter().map(|&i| d.y[i]).sum::<f64>() / idx.len() as f64;
    idx.iter().map(|&i| (d.y[i] - mean).powi(2)).sum()
}

fn best_loss(idx: &[usize], d: &TreeData, depth: usize) -> f64 {
    let mut m = sse(idx, d);
    if depth == 0 {
        return m;
    }
    for f in 0..d.x[0].len() {
        let mut vals: Vec<f64> = idx.iter().map(|&i| d.x[i][f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| d.x[i][f] <= t);
            m = m.min(best_loss(&l, d, depth - 1) + best_loss(&r, d, depth - 1));
        }
    }
    m
}

fn gbrt_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = rng.random_range(2..=32);
        let p = rng.random_range(1..=2);
        let depth = rng.random_range(1..=2);
        let coarse = rng.random_bool(0.5);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..p)
                    .map(|_| if coarse { rng.random_range(0..4) as f64 } else { rng.random_range(-5.0..5.0) })
                    .collect()
            })
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let d = TreeData { x, y };
        let m = Matrix::from_rows(p, &d.x);
        let params = TreeParams {
            max_depth: depth,
            ..TreeParams::default()
        };
        let tree = fit_tree(&m, &d.y, &vec![1.0; n], &params).map_err(|e| e.to_string())?;
        let fitted: f64 = (0..n).map(|i| (d.y[i] - tree.predict(&d.x[i])).powi(2)).sum();
        let all: Vec<usize> = (0..n).collect();
        let optimum = best_loss(&all, &d, depth);
        worst = worst.max((fitted - optimum).abs());
        check((fitted - optimum).abs() <= 1e-9, || format!("case {case}: fitted {fitted}, optimum {optimum}"))?;
    }
    Ok(format!("100 datasets, worst loss gap {worst:.1e}"))
}

// 3. LSTM backpropagation through time.

fn lstm_gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for s in 0..5 {
        let input = 5;
        let net = LstmNetwork::<f64>::seeded(input, 8, 300 + s).map_err(|e| e.to_string())?;
        let rows = rng.random_range(4..=10);
        let seq = Matrix::from_vec(rows, input, (0..rows * input).map(|_| rng.random_range(-1.5..1.5)).collect());
        let err = gradient_check(&net, &seq, rng.random_range(-1.0..1.0), 1e-5).map_err(|e| e.to_string())?;
        worst = worst.max(err);
    }
    check(worst < 1e-4, || format!("max relative error {worst:e}"))?;
    Ok(format!("8 units, 5 sequences, max relative error {worst:.2e}"))
}

// 4. Architecture and clamp.

fn architecture() -> Outcome {
    check(DENSE1 == 64 && DENSE2 == 32, || format!("head widths {DENSE1}, {DENSE2}"))?;
    for input in [1, 17, 38] {
        let lstm = 4 * 128 * (input + 128 + 1);
        let dense = (128 + 1) * 64 + (64 + 1) * 32 + (32 + 1);
        let net = LstmNetwork::<f64>::zeros(input, 128).map_err(|e| e.to_string())?;
        check(net.param_count() == lstm + dense, || {
            format!("input {input}: {} parameters, closed form {}", net.param_count(), lstm + dense)
        })?;
        check(param_count(input, 128) == lstm + dense, || format!("param_count({input}, 128)"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let raw: Vec<f64> = (0..1000).map(|_| rng.random_range(-5.0..5.0)).collect();
    let clamped = clamp_nonnegative(&raw);
    check(
        clamped.iter().zip(&raw).all(|(c, r)| *c >= 0.0 && (*r < 0.0 || c == r)),
        || "clamp changed a nonnegative value or left a negative".into(),
    )?;
    let ds = synthetic_catchment(4, 300, "06A01", 1, 12, false, start()).map_err(|e| e.to_string())?;
    let split = ds.split().map_err(|e| e.to_string())?;
    let scalers = Scalers::fit(&ds, &split.train).map_err(|e| e.to_string())?;
    let meta = RunoffMeta {
        station: "06A01".into(),
        horizon: 1,
        window: 12,
        columns: ds.columns.clone(),
        scaler_version: scalers.version(),
        model_version: "acceptance".into(),
    };
    let mut served = 0;
    for seed in 0..30 {
        let net = LstmNetwork::<f64>::seeded(ds.width(), 4, seed).map_err(|e| e.to_string())?;
        for e in ds.sample_ends().step_by(10) {
            let v = predict_streamflow(&net, &scalers, &meta, &ds.window_rows(e), 1).map_err(|e| e.to_string())?;
            check(v >= 0.0, || format!("served {v}"))?;
            served += 1;
        }
    }
    Ok(format!("(input, 128, 64, 32, 1) counts match; {served} served forecasts all >= 0"))
}

// 5. Pooled pipeline on a seeded synthetic fixture.

fn synth_spec(seed: u64) -> SyntheticSpec {
    let stations = (0..5)
        .map(|k| StationMeta {
            station_id: format!("st{k}"),
            name: format!("station {k}"),
            latitude: 37.6 + 0.05 * k as f64,
            longitude: -0.8,
            source_id: "syn".into(),
        })
        .collect();
    SyntheticSpec {
        seed,
        source_id: "syn".into(),
        variables: vec![
            SyntheticVariable::new("temperature", "degC", 20.0, 3.0, 0.95, 0.3, 0.1),
            SyntheticVariable::new("salinity", "PSU", 45.0, 1.0, 0.95, 0.1, 0.1),
            SyntheticVariable::new("oxygen", "mg/l", 7.0, 1.5, 0.95, 0.15, 0.1),
        ],
        stations,
        granularity: Span::hours(1),
    }
}

fn pipeline_structure() -> Outcome {
    let hours = 45 * 24;
    let obs = synthesize(&synth_spec(5), start(), start() + Duration::hours(hours)).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig {
        search_budget: 1,
        seed: 1,
        stride: 6,
        ..PipelineConfig::new(Regime::Hourly)
    };
    let mut lines = Vec::new();
    for var in ["temperature", "salinity", "oxygen"] {
        let keys: BTreeSet<SeriesKey> = obs.iter().filter(|o| o.series.variable == var).map(|o| o.series.clone()).collect();
        let series = keys
            .into_iter()
            .map(|k| {
                let mine: Vec<Observation> = obs.iter().filter(|o| o.series == k).cloned().collect();
                AlignedSeries::from_observations(k, &mine, start(), Span::hours(1), hours as usize, Aggregation::Mean)
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let missing = series.iter().map(|s| s.missing_fraction()).sum::<f64>() / series.len() as f64;
        let out = run_pipeline(series, &cfg).map_err(|e| e.to_string())?;
        check(out.kept.len() == 5, || format!("{var}: kept {}", out.kept.len()))?;
        let h1 = |id: &str| out.reports.iter().find(|r| r.candidate == id).and_then(|r| r.at(1)).map(|m| m.mae);
        let naive = h1("naive").ok_or("no naive candidate")?;
        // The GBRT champion is the best GBRT candidate at h=1.
        let best = out
            .reports
            .iter()
            .filter(|r| r.candidate.starts_with("gbrt"))
            .filter_map(|r| r.at(1).map(|m| (m.mae, r)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .ok_or("no GBRT candidate")?;
        let (gbrt, champion) = best;
        check(gbrt <= 0.8 * naive, || format!("{var}: best GBRT {gbrt:.4} vs naive {naive:.4}"))?;
        let curve: Vec<f64> = [1, 6, 12, 24]
            .iter()
            .map(|&h| champion.at(h).map(|m| m.mae).ok_or(format!("{var}: no horizon {h}")))
            .collect::<Result<_, _>>()?;
        check(curve.windows(2).all(|w| w[0] <= w[1]), || {
            format!("{var}: {} MAE by horizon {curve:?}", champion.candidate)
        })?;
        lines.push(format!(
            "{var}: {:.0}% missing, {} {:.1}% under naive, overall champion {}",
            100.0 * missing,
            champion.candidate,
            100.0 * (1.0 - gbrt / naive),
            out.champion
        ));
    }
    Ok(lines.join("; "))
}

// 6. Storage.

fn storage() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let key = SeriesKey::new("sdc-upct", "buoy-6", "salinity", "PSU");
    let quality = [Quality::Measured, Quality::Imputed, Quality::Rejected];
    let records: Vec<SegmentRecord> = (0..100_000)
        .map(|_| SegmentRecord {
            timestamp: rng.random(),
            value: f64::from_bits(rng.random()),
            quality: quality[rng.random_range(0..3)],
        })
        .collect();
    let bytes = encode(&key, &records).map_err(|e| e.to_string())?;
    let (k, back) = decode(&bytes, "acceptance").map_err(|e| e.to_string())?;
    check(k == key && back.len() == records.len(), || "round trip changed shape".into())?;
    check(records.iter().zip(&back).all(|(a, b)| a.bit_eq(b)), || "round trip not bit-exact".into())?;

    let rules = ValidationRules::lagoon_defaults();
    let mut conserved = 0;
    for week in 0..50 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut w = WindowStore::open(dir.path().join("window")).map_err(|e| e.to_string())?;
        let mut h = HistoricalStore::open(dir.path().join("hist")).map_err(|e| e.to_string())?;
        let week_end = Utc.with_ymd_and_hms(2024, 1, 8, 0, 0, 0).unwrap() + Duration::weeks(week);
        let n = rng.random_range(1..200);
        let batch: Vec<Observation> = (0..n)
            .map(|i| {
                let v = if rng.random_bool(0.15) { 900.0 } else { rng.random_range(35.0..50.0) };
                let t = week_end - Duration::days(7) + Duration::minutes(5 * i as i64 + 1);
                Observation::measured(key.clone(), t, v).unwrap()
            })
            .collect();
        w.append(&batch, week_end).map_err(|e| e.to_string())?;
        let r = compact(&w, &mut h, &rules, week_end, week_end).map_err(|e| e.to_string())?;
        check(r.moved + r.rejected == n, || format!("week {week}: {} + {} != {n}", r.moved, r.rejected))?;
        conserved += n;
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut w = WindowStore::open(dir.path().join("window")).map_err(|e| e.to_string())?;
    let now = Utc.with_ymd_and_hms(2024, 6, 15, 0, 0, 0).unwrap();
    let old: Vec<Observation> = (0..14 * 24)
        .map(|i| Observation::measured(key.clone(), now - Duration::hours(14 * 24 - i), 40.0).unwrap())
        .collect();
    w.append(&old, now - Duration::days(8)).map_err(|e| e.to_string())?;
    w.prune(now).map_err(|e| e.to_string())?;
    let left = w.read(&key, DateTime::<Utc>::MIN_UTC, DateTime::<Utc>::MAX_UTC).map_err(|e| e.to_string())?;
    let cutoff = now - Duration::days(7);
    check(!left.is_empty() && left.iter().all(|o| o.timestamp >= cutoff), || "prune left old records".into())?;

    let small: Vec<SegmentRecord> = records[..32].to_vec();
    let seg = encode(&key, &small).map_err(|e| e.to_string())?;
    let mut corruptions = 0;
    for i in 0..seg.len() {
        for x in 1..=255u8 {
            let mut bad = seg.clone();
            bad[i] ^= x;
            check(matches!(decode(&bad, "seg"), Err(StoreError::Integrity { .. })), || {
                format!("byte {i} xor {x:#04x} not detected")
            })?;
            corruptions += 1;
        }
    }
    Ok(format!(
        "1e5 records bit-exact; {conserved} records over 50 weeks conserved; prune ok; {corruptions} corruptions detected"
    ))
}

// 7. Context query.

fn haversine(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (la1, lo1, la2, lo2) = (a.0.to_radians(), a.1.to_radians(), b.0.to_radians(), b.1.to_radians());
    let h = ((la2 - la1) / 2.0).sin().powi(2) + la1.cos() * la2.cos() * ((lo2 - lo1) / 2.0).sin().powi(2);
    2.0 * 6_371_000.0 * h.sqrt().asin()
}

fn context_query() -> Outcome {
    let at = start();
    let mut store = ContextStore::in_memory();
    store.upsert_entity(twin_context::fixtures::device_015(), at).map_err(|e| e.to_string())?;
    let far = ContextEntity::new("urn:ngsi-ld:Device:016")
        .unwrap()
        .with_location(GeoPoint::new(37.80, -0.80).unwrap());
    let other_type = ContextEntity::new("urn:ngsi-ld:SoundingPlace:003")
        .unwrap()
        .with_location(GeoPoint::new(37.7544, -0.8586).unwrap());
    store.upsert_entity(far, at).map_err(|e| e.to_string())?;
    store.upsert_entity(other_type, at).map_err(|e| e.to_string())?;

    let centre = GeoPoint::new(37.7544, -0.8586).unwrap();
    let filter = |max: f64| EntityFilter {
        entity_type: Some("Device".into()),
        near: Some((centre, max)),
    };
    let hits = store.query(&filter(1000.0)).map_err(|e| e.to_string())?;
    check(hits.len() == 1 && hits[0].id == "urn:ngsi-ld:Device:015", || format!("{} hits", hits.len()))?;
    let kv = hits[0].to_key_values();
    for field in ["id", "type", "controlledProperty", "location", "dateLastValueReported"] {
        check(kv.get(field).is_some(), || format!("missing {field}"))?;
    }
    check(kv["location"]["coordinates"] == json!([37.7543, -0.8588]), || format!("{}", kv["location"]))?;

    let d = haversine((37.7544, -0.8586), (37.7543, -0.8588));
    check((d - 20.8).abs() < 0.05, || format!("oracle distance {d}"))?;
    let inside = store.query(&filter(d + 0.1)).map_err(|e| e.to_string())?.len();
    let outside = store.query(&filter(d - 0.1)).map_err(|e| e.to_string())?.len();
    check(inside == 1 && outside == 0, || format!("at {d:.2} m: inside {inside}, outside {outside}"))?;
    Ok(format!("Device:015 found with listing fields; distance {d:.2} m brackets the predicate"))
}

// 8 and 9 share a live server on the demo data root.

struct Live {
    _dir: tempfile::TempDir,
    _rt: tokio::runtime::Runtime,
    url: String,
    state: Arc<ServeState>,
    now: DateTime<Utc>,
}

fn live_server() -> Result<Live, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let now = Utc.with_ymd_and_hms(2024, 6, 10, 12, 0, 0).unwrap();
    let demo = demo_root(dir.path(), now).map_err(|e| e.to_string())?;
    let state = Arc::new(ServeState::open(demo.root.clone(), now).map_err(|e| e.to_string())?);
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| e.to_string())?;
    let listener = rt
        .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
        .map_err(|e| e.to_string())?;
    let url = format!("http://{}", listener.local_addr().map_err(|e| e.to_string())?);
    rt.spawn(twin_api::serve(listener, state.clone()));
    Ok(Live {
        _dir: dir,
        _rt: rt,
        url,
        state,
        now,
    })
}

fn scenario_identity(live: &Live) -> Outcome {
    let client = reqwest::blocking::Client::new();
    let mut deltas = Vec::new();
    for horizon in [1, 6] {
        for body in [
            json!({"station": "06A01", "horizon": horizon}),
            json!({"station": "06A01", "horizon": horizon, "multipliers": {"rain": 1.0}, "offsets": {"rain": 0.0}}),
        ] {
            let resp = client
                .post(format!("{}/scenario", live.url))
                .json(&body)
                .send()
                .map_err(|e| e.to_string())?;
            let status = resp.status().as_u16();
            let v: Value = resp.json().map_err(|e| e.to_string())?;
            check(status == 200, || format!("status {status}: {v}"))?;
            check(v["delta"].as_f64() == Some(0.0) && v["baseline"] == v["perturbed"], || format!("{v}"))?;
            deltas.push(v["delta"].as_f64().unwrap());
        }
    }
    Ok(format!("{} identity requests, every delta exactly {:?}", deltas.len(), deltas[0]))
}

fn api_availability(live: &Live) -> Outcome {
    let stop = Arc::new(AtomicBool::new(false));
    let ok = Arc::new(AtomicUsize::new(0));
    let failures = Arc::new(std::sync::Mutex::new(Vec::<String>::new()));
    let paths = [
        "/stations",
        "/window?station=A&variable=temperature",
        "/forecast?station=A&variable=temperature&horizon=6",
        "/forecast?station=06A01&variable=streamflow&horizon=1",
    ];
    let workers: Vec<_> = (0..4)
        .map(|k| {
            let (stop, ok, failures) = (stop.clone(), ok.clone(), failures.clone());
            let url = format!("{}{}", live.url, paths[k]);
            std::thread::spawn(move || {
                let client = reqwest::blocking::Client::new();
                while !stop.load(Ordering::Relaxed) {
                    match client.get(&url).send() {
                        Ok(r) if r.status().as_u16() == 200 && r.headers().contains_key(SNAPSHOT_HEADER) => {
                            ok.fetch_add(1, Ordering::Relaxed);
                        }
                        Ok(r) => failures.lock().unwrap().push(format!("{url}: {}", r.status())),
                        Err(e) => failures.lock().unwrap().push(format!("{url}: {e}")),
                    }
                }
            })
        })
        .collect();
    let mut reloads = 0;
    for i in 0..100 {
        live.state
            .reload(live.now + Duration::seconds(i))
            .map_err(|e| format!("reload {i}: {e}"))?;
        reloads += 1;
        std::thread::sleep(StdDuration::from_millis(5));
    }
    stop.store(true, Ordering::Relaxed);
    for w in workers {
        w.join().map_err(|_| "client thread panicked".to_string())?;
    }
    let failures = failures.lock().unwrap().clone();
    check(failures.is_empty(), || format!("{} failures, first: {}", failures.len(), failures[0]))?;
    let served = ok.load(Ordering::Relaxed);
    check(served > 100, || format!("only {served} requests served"))?;

    let client = reqwest::blocking::Client::new();
    for days in [8, 30] {
        let r = client
            .get(format!("{}/window?station=A&variable=temperature&days={days}", live.url))
            .send()
            .map_err(|e| e.to_string())?;
        check(r.status().as_u16() == 400, || format!("days={days}: {}", r.status()))?;
    }
    let r = client
        .get(format!("{}/window?station=A&variable=temperature&days=7", live.url))
        .send()
        .map_err(|e| e.to_string())?;
    check(r.status().as_u16() == 200, || format!("days=7: {}", r.status()))?;
    Ok(format!("{reloads} reloads, {served} GETs, 0 failures; days>7 rejected with 400"))
}

// 10. Determinism.

fn determinism() -> Outcome {
    let spec = synth_spec(10);
    let data = |s: &SyntheticSpec| synthesize(s, start(), start() + Duration::days(10)).map(|o| serde_json::to_vec(&o).unwrap());
    check(data(&spec).unwrap() == data(&spec).unwrap(), || "synthetic data differs".into())?;
    check(data(&spec).unwrap() != data(&synth_spec(11)).unwrap(), || "seed has no effect".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let rows: Vec<Vec<f64>> = (0..400).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let y: Vec<f64> = rows.iter().map(|r| (TAU * r[0] / 4.0).sin() + r[1] * r[2] + rng.random_range(-0.1..0.1)).collect();
    let x = Matrix::from_rows(3, &rows);
    let fit = || {
        fit_gbrt(&x, &y, &vec![1.0; 400], &GbrtParams::new(60, 0.1, 4, 3))
            .map(|g| g.predict(&x).iter().map(|v| v.to_bits()).collect::<Vec<u64>>())
    };
    check(fit().unwrap() == fit().unwrap(), || "GBRT predictions differ".into())?;

    let ds = linear_response(11, 400, 6, start()).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        hidden: 6,
        epochs: 4,
        batch_size: 16,
        learning_rate: 5e-3,
        seed: 17,
        clip_norm: 1.0,
    };
    let curve = || fit_runoff(&ds, &cfg).map(|(_, r)| serde_json::to_vec(&r.curve).unwrap());
    check(curve().unwrap() == curve().unwrap(), || "LSTM loss curves differ".into())?;

    let (train_x, train_y) = (Matrix::from_rows(3, &rows[..300]), &y[..300]);
    let (val_x, val_y) = (Matrix::from_rows(3, &rows[300..]), &y[300..]);
    let trials = || {
        let mut objective = |p: &HyperParams| {
            let g = fit_gbrt(&train_x, train_y, &vec![1.0; 300], &p.gbrt())?;
            Ok(g.predict(&val_x).iter().zip(val_y).map(|(a, b)| (a - b).abs()).sum::<f64>() / 100.0)
        };
        search(&SearchSpace::default(), &mut objective, 6, 3).map(|r| serde_json::to_vec(&r).unwrap())
    };
    check(trials().unwrap() == trials().unwrap(), || "search trial logs differ".into())?;
    Ok("synthetic data, GBRT predictions, LSTM curves and search trials byte-identical".into())
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(usize, &str, f64, Outcome)> = Vec::new();
    let mut run = |n: usize, name: &'static str, limit: Option<f64>, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let mut outcome = f();
        let secs = t.elapsed().as_secs_f64();
        if let (Ok(detail), Some(limit)) = (&outcome, limit) {
            if secs >= limit {
                outcome = Err(format!("{detail}; took {secs:.2} s, limit {limit} s"));
            }
        }
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        println!("{tag} [{n:>2}] {name} ({secs:.2} s): {detail}");
        results.push((n, name, secs, outcome));
    };
    run(1, "metric exactness", Some(1.0), &metric_exactness);
    run(2, "GBRT exhaustive oracle", Some(30.0), &gbrt_oracle);
    run(3, "LSTM gradient check", Some(30.0), &lstm_gradient_check);
    run(4, "architecture and clamp", None, &architecture);
    run(5, "pipeline structure", Some(120.0), &pipeline_structure);
    run(6, "storage", Some(60.0), &storage);
    run(7, "context query", Some(1.0), &context_query);
    match live_server() {
        Ok(live) => {
            run(8, "scenario identity", None, &|| scenario_identity(&live));
            run(9, "API availability", None, &|| api_availability(&live));
        }
        Err(e) => {
            run(8, "scenario identity", None, &|| Err(format!("server: {e}")));
            run(9, "API availability", None, &|| Err(format!("server: {e}")));
        }
    }
    run(10, "determinism", None, &determinism);
    let failed = results.iter().filter(|r| r.3.is_err()).count();
    println!(
        "{} of {} criteria passed in {:.1} s",
        results.len() - failed,
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
