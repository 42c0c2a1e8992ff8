use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twin_core::time::parse_rfc3339;
use twin_core::{Observation, SeriesKey};
use twin_store::{
    compact, storage_report, HistoricalStore, RejectReason, ValidationRules, WindowStore,
};

fn week_end() -> DateTime<Utc> {
    parse_rfc3339("2024-06-10T00:00:00Z").unwrap()
}

fn salinity() -> SeriesKey {
    SeriesKey::new("sdc-upct", "buoy-6", "salinity", "PSU")
}

fn oxygen() -> SeriesKey {
    SeriesKey::new("sdc-upct", "buoy-6", "oxygen", "mg/l")
}

fn series(key: SeriesKey, values: &[f64]) -> Vec<Observation> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let t = week_end() - Duration::days(6) + Duration::hours(i as i64);
            Observation::measured(key.clone(), t, v).unwrap()
        })
        .collect()
}

#[test]
fn ten_valid_records_move_and_rerun_is_noop() {
    let dir = tempfile::tempdir().unwrap();
    let mut w = WindowStore::open(dir.path().join("window")).unwrap();
    let mut h = HistoricalStore::open(dir.path().join("hist")).unwrap();
    w.append(&series(salinity(), &[45.0, 45.1, 45.2, 45.1, 45.0]), week_end()).unwrap();
    w.append(&series(oxygen(), &[7.0, 7.1, 7.2, 7.3, 7.4]), week_end()).unwrap();
    let rules = ValidationRules::lagoon_defaults();

    let r = compact(&w, &mut h, &rules, week_end(), week_end()).unwrap();
    assert_eq!((r.moved, r.rejected, r.segments_written), (10, 0, 2));

    let again = compact(&w, &mut h, &rules, week_end(), week_end()).unwrap();
    assert_eq!((again.moved, again.rejected, again.segments_written), (0, 0, 0));
    assert_eq!(h.segments().len(), 2);
}

#[test]
fn out_of_range_salinity_is_rejected_with_reason() {
    let dir = tempfile::tempdir().unwrap();
    let mut w = WindowStore::open(dir.path().join("window")).unwrap();
    let mut h = HistoricalStore::open(dir.path().join("hist")).unwrap();
    w.append(&series(salinity(), &[45.0, 999.0, 45.2]), week_end()).unwrap();
    let r = compact(&w, &mut h, &ValidationRules::lagoon_defaults(), week_end(), week_end()).unwrap();
    assert_eq!((r.moved, r.rejected), (2, 1));
    assert_eq!(r.rejections[0].reason, RejectReason::Range);
    assert_eq!(r.rejections[0].reason.to_string(), "range");
    assert_eq!(r.rejections[0].value, 999.0);
}

#[test]
fn records_outside_the_week_stay_put() {
    let dir = tempfile::tempdir().unwrap();
    let mut w = WindowStore::open(dir.path().join("window")).unwrap();
    let mut h = HistoricalStore::open(dir.path().join("hist")).unwrap();
    let at_end = Observation::measured(salinity(), week_end(), 45.0).unwrap();
    let inside = Observation::measured(salinity(), week_end() - Duration::hours(1), 45.0).unwrap();
    w.append(&[inside, at_end], week_end()).unwrap();
    let r = compact(&w, &mut h, &ValidationRules::new(), week_end(), week_end()).unwrap();
    assert_eq!(r.moved, 1, "week is half-open at its end");
}

#[test]
fn future_week_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let w = WindowStore::open(dir.path().join("window")).unwrap();
    let mut h = HistoricalStore::open(dir.path().join("hist")).unwrap();
    let now = week_end() - Duration::days(1);
    assert!(compact(&w, &mut h, &ValidationRules::new(), week_end(), now).is_err());
}

#[test]
fn storage_report_counts_and_beats_plain_text() {
    let dir = tempfile::tempdir().unwrap();
    let mut w = WindowStore::open(dir.path().join("window")).unwrap();
    let mut h = HistoricalStore::open(dir.path().join("hist")).unwrap();
    let empty = storage_report(&w, &h).unwrap();
    assert_eq!((empty.window_bytes, empty.hist_bytes, empty.records), (0, 0, 0));

    // 12_000 five-minute readings of a smooth series
    let start = parse_rfc3339("2024-01-01T00:00:00Z").unwrap();
    let recs: Vec<Observation> = (0..12_000)
        .map(|i| {
            let v = 20.0 + 3.0 * (i as f64 * 0.01).sin();
            Observation::measured(salinity(), start + Duration::minutes(5 * i), v).unwrap()
        })
        .collect();
    let text_bytes: usize = recs.iter().map(|o| twin_store::window::format_line(o).len()).sum();
    h.write_segment(&salinity(), "bulk", recs).unwrap();
    let now = parse_rfc3339("2024-06-10T00:00:00Z").unwrap();
    w.append(&series(oxygen(), &[7.0, 7.1, 7.2]), now).unwrap();

    let r = storage_report(&w, &h).unwrap();
    assert_eq!(r.records, 12_003);
    assert!(r.window_bytes > 0);
    assert!(
        (r.hist_bytes as usize) < text_bytes,
        "columnar {} bytes vs text {} bytes",
        r.hist_bytes,
        text_bytes
    );
}

#[test]
fn conservation_over_random_weeks() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rules = ValidationRules::lagoon_defaults();
    for _ in 0..10 {
        let dir = tempfile::tempdir().unwrap();
        let mut w = WindowStore::open(dir.path().join("window")).unwrap();
        let mut h = HistoricalStore::open(dir.path().join("hist")).unwrap();
        let n = rng.random_range(1..60);
        let values: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.2) { 500.0 } else { rng.random_range(30.0..50.0) })
            .collect();
        w.append(&series(salinity(), &values), week_end()).unwrap();
        let r = compact(&w, &mut h, &rules, week_end(), week_end()).unwrap();
        assert_eq!(r.moved + r.rejected, n);
        let stored = h.read(&salinity(), week_end() - Duration::days(7), week_end()).unwrap();
        assert_eq!(stored.len(), r.moved);
        for rej in &r.rejections {
            assert!(stored.iter().all(|o| o.timestamp != rej.timestamp));
        }
    }
}
