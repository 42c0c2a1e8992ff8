use serde::{Deserialize, Serialize};

use crate::error::{ContextError, Result};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(ContextError::Usage(format!("coordinates out of range: [{lat}, {lon}]")));
        }
        Ok(GeoPoint { lat, lon })
    }

    /// Parses `[lat,lon]` (brackets optional), the order used by the
    /// entity listing this store mirrors.
    pub fn parse(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        let bad = || ContextError::Usage(format!("coordinates must be [lat,lon], got '{s}'"));
        if parts.len() != 2 {
            return Err(bad());
        }
        let lat = parts[0].parse::<f64>().map_err(|_| bad())?;
        let lon = parts[1].parse::<f64>().map_err(|_| bad())?;
        GeoPoint::new(lat, lon)
    }
}

/// Great-circle distance on a sphere of radius [`EARTH_RADIUS_M`].
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}
