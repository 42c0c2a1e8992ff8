//! Seeded synthetic catchments for tests, demos and the CLI.

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use super::dataset::{InputColumn, RunoffDataset, STREAMFLOW};
use crate::error::Result;
use crate::features::Matrix;

pub const TARGET_STATIONS: [&str; 2] = ["06A01", "06A18"];
pub const STREAMFLOW_STATIONS: [&str; 7] = ["06A01", "06A18", "06A02", "06A03", "06A04", "06A05", "06A06"];
pub const RAIN_GAUGES: usize = 10;
pub const FORECAST_STATIONS: usize = 7;

fn hourly_times(start: DateTime<Utc>, n: usize) -> Vec<DateTime<Utc>> {
    (0..n).map(|i| start + Duration::hours(i as i64)).collect()
}

/// Two inputs, `[rain, streamflow]`, with streamflow exactly `0.5` times
/// the previous hour's rain.
pub fn linear_response(seed: u64, hours: usize, window: usize, start: DateTime<Utc>) -> Result<RunoffDataset<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exp = Exp::new(0.5).expect("positive rate");
    let rain: Vec<f64> = (0..hours)
        .map(|_| if rng.random_bool(0.4) { exp.sample(&mut rng) } else { 0.0 })
        .collect();
    let flow: Vec<f64> = (0..hours).map(|t| if t == 0 { 0.0 } else { 0.5 * rain[t - 1] }).collect();
    let data: Vec<f64> = (0..hours).flat_map(|t| [rain[t], flow[t]]).collect();
    RunoffDataset::new(
        "06A01",
        1,
        window,
        vec![InputColumn::new("rg01/rain", "rain"), InputColumn::new("06A01/streamflow", STREAMFLOW)],
        Matrix::from_vec(hours, 2, data),
        flow,
        hourly_times(start, hours),
    )
}

/// The full-width catchment: streamflow at 7 stations and rain at 10
/// gauges (17 inputs), plus precipitation, temperature and humidity
/// forecasts from 7 stations when `with_forecast` (38 inputs). Rain falls
/// in storm spells over a shared field; each station drains it through a
/// linear reservoir.
pub fn synthetic_catchment(
    seed: u64,
    hours: usize,
    station: &str,
    horizon: usize,
    window: usize,
    with_forecast: bool,
    start: DateTime<Utc>,
) -> Result<RunoffDataset<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exp = Exp::new(0.6).expect("positive rate");
    let noise = Normal::new(0.0, 1.0).expect("unit normal");

    let mut wet = false;
    let field: Vec<f64> = (0..hours)
        .map(|_| {
            wet = if wet { rng.random_bool(0.8) } else { rng.random_bool(0.03) };
            if wet {
                exp.sample(&mut rng)
            } else {
                0.0
            }
        })
        .collect();
    let gauges: Vec<Vec<f64>> = (0..RAIN_GAUGES)
        .map(|g| {
            let w = 0.7 + 0.06 * g as f64;
            field
                .iter()
                .map(|&f| (w * f + if f > 0.0 { 0.1 * noise.sample(&mut rng) } else { 0.0 }).max(0.0))
                .collect()
        })
        .collect();
    let flows: Vec<Vec<f64>> = STREAMFLOW_STATIONS
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let (a, b, base) = (0.85 + 0.015 * k as f64, 0.3 + 0.05 * k as f64, 0.05 + 0.02 * k as f64);
            let mut q = base / (1.0 - a);
            (0..hours)
                .map(|t| {
                    let r = if t == 0 { 0.0 } else { field[t - 1] };
                    q = a * q + b * r + base;
                    q
                })
                .collect()
        })
        .collect();

    let mut columns: Vec<InputColumn> = STREAMFLOW_STATIONS
        .iter()
        .map(|s| InputColumn::new(format!("{s}/streamflow"), STREAMFLOW))
        .collect();
    columns.extend((1..=RAIN_GAUGES).map(|g| InputColumn::new(format!("rg{g:02}/rain"), "rain")));
    let mut forecast: Vec<Vec<f64>> = Vec::new();
    if with_forecast {
        for s in 1..=FORECAST_STATIONS {
            columns.push(InputColumn::new(format!("aemet{s}/precipitation"), "precipitation"));
            forecast.push(field.iter().map(|&f| (f + 0.2 * noise.sample(&mut rng)).max(0.0)).collect());
            columns.push(InputColumn::new(format!("aemet{s}/temperature"), "temperature"));
            forecast.push(
                (0..hours)
                    .map(|t| 16.0 + 6.0 * (2.0 * std::f64::consts::PI * (t % 24) as f64 / 24.0).sin() + 0.5 * noise.sample(&mut rng))
                    .collect(),
            );
            columns.push(InputColumn::new(format!("aemet{s}/humidity"), "humidity"));
            forecast.push(field.iter().map(|&f| (60.0 + 8.0 * f + 3.0 * noise.sample(&mut rng)).clamp(0.0, 100.0)).collect());
        }
    }
    let all: Vec<&Vec<f64>> = flows.iter().chain(&gauges).chain(&forecast).collect();
    let data: Vec<f64> = (0..hours).flat_map(|t| all.iter().map(move |c| c[t])).collect();
    let target_idx = STREAMFLOW_STATIONS.iter().position(|s| *s == station).unwrap_or(0);
    RunoffDataset::new(
        station,
        horizon,
        window,
        columns,
        Matrix::from_vec(hours, all.len(), data),
        flows[target_idx].clone(),
        hourly_times(start, hours),
    )
}
