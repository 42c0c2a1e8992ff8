//! Registry of data sources and the variables they publish.
//!
//! Persisted as one JSON document per source, `<dir>/<source_id>.json`.
//! The document is the serde form of [`DatasetDescriptor`].

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::time::Span;
use crate::types::{Aggregation, SeriesKey, StationMeta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub unit: String,
    #[serde(default)]
    pub aggregation: Aggregation,
}

impl VariableSpec {
    pub fn new(name: &str, unit: &str, aggregation: Aggregation) -> Self {
        VariableSpec {
            name: name.to_string(),
            unit: unit.to_string(),
            aggregation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub source_id: String,
    pub field_area: String,
    /// `None` for sources that only publish real-time data.
    pub start_date: Option<NaiveDate>,
    pub variables: Vec<VariableSpec>,
    pub native_granularity: Span,
    /// Cron expression with a leading seconds field, e.g. `0 0 * * * *`.
    pub publish_schedule: String,
    #[serde(default)]
    pub stations: Vec<StationMeta>,
}

impl DatasetDescriptor {
    pub fn validate(&self) -> Result<()> {
        if self.source_id.is_empty() || self.source_id.contains(['/', '\\']) {
            return Err(CoreError::usage(format!("invalid source id '{}'", self.source_id)));
        }
        if self.variables.is_empty() {
            return Err(CoreError::usage(format!("{} declares no variables", self.source_id)));
        }
        if self.native_granularity.as_secs() <= 0 {
            return Err(CoreError::usage(format!(
                "{} has non-positive granularity",
                self.source_id
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.stations {
            s.validate()?;
            if !seen.insert(&s.station_id) {
                return Err(CoreError::usage(format!(
                    "station {} listed twice in {}",
                    s.station_id, self.source_id
                )));
            }
        }
        Ok(())
    }

    pub fn variable(&self, name: &str) -> Option<&VariableSpec> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn station(&self, station_id: &str) -> Option<&StationMeta> {
        self.stations.iter().find(|s| s.station_id == station_id)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    sources: BTreeMap<String, DatasetDescriptor>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a source. Registering an identical descriptor again is a
    /// no-op; a different descriptor under the same id is a conflict.
    pub fn register(&mut self, descriptor: DatasetDescriptor) -> Result<String> {
        descriptor.validate()?;
        let id = descriptor.source_id.clone();
        match self.sources.get(&id) {
            Some(existing) if *existing == descriptor => Ok(id),
            Some(_) => Err(CoreError::Conflict(format!(
                "source '{id}' already registered with a different descriptor"
            ))),
            None => {
                self.sources.insert(id.clone(), descriptor);
                Ok(id)
            }
        }
    }

    pub fn get(&self, source_id: &str) -> Option<&DatasetDescriptor> {
        self.sources.get(source_id)
    }

    pub fn sources(&self) -> impl Iterator<Item = &DatasetDescriptor> {
        self.sources.values()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Resolves the full key (with unit) for a registered series.
    pub fn series_key(&self, source_id: &str, station_id: &str, variable: &str) -> Option<SeriesKey> {
        let d = self.sources.get(source_id)?;
        let v = d.variable(variable)?;
        if !d.stations.is_empty() && d.station(station_id).is_none() {
            return None;
        }
        Some(SeriesKey::new(source_id, station_id, variable, &v.unit))
    }

    /// Looks a series up by station and variable alone, the way the API
    /// addresses it. Returns the first match in source-id order.
    pub fn find_series(&self, station_id: &str, variable: &str) -> Option<SeriesKey> {
        self.sources.values().find_map(|d| {
            d.station(station_id)?;
            self.series_key(&d.source_id, station_id, variable)
        })
    }

    pub fn aggregation(&self, key: &SeriesKey) -> Aggregation {
        self.get(&key.source_id)
            .and_then(|d| d.variable(&key.variable))
            .map(|v| v.aggregation)
            .unwrap_or_default()
    }

    pub fn stations(&self) -> impl Iterator<Item = (&DatasetDescriptor, &StationMeta)> {
        self.sources
            .values()
            .flat_map(|d| d.stations.iter().map(move |s| (d, s)))
    }

    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
        for d in self.sources.values() {
            let path = dir.join(format!("{}.json", d.source_id));
            let body = serde_json::to_vec_pretty(d).expect("descriptor serializes");
            let tmp = path.with_extension("json.tmp");
            fs::write(&tmp, body).map_err(|e| CoreError::io(&tmp, e))?;
            fs::rename(&tmp, &path).map_err(|e| CoreError::io(&path, e))?;
        }
        Ok(())
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut catalog = Catalog::new();
        if !dir.exists() {
            return Ok(catalog);
        }
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(|e| CoreError::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let body = fs::read(&path).map_err(|e| CoreError::io(&path, e))?;
            let d: DatasetDescriptor = serde_json::from_slice(&body).map_err(|e| CoreError::Json {
                path: path.display().to_string(),
                source: e,
            })?;
            catalog.register(d)?;
        }
        Ok(catalog)
    }

    /// The eight sources the lagoon twin collects from, with their
    /// publishing granularity. Station lists are left empty; deployments
    /// fill them in.
    pub fn lagoon() -> Self {
        use Aggregation::{Mean, Sum};
        let v = VariableSpec::new;
        let date = |y, m, d| NaiveDate::from_ymd_opt(y, m, d);
        let hourly = "0 0 * * * *";
        let daily = "0 0 6 * * *";
        let entries = vec![
            DatasetDescriptor {
                source_id: "saih-catchments".into(),
                field_area: "Coastal, River Basin".into(),
                start_date: date(2016, 1, 8),
                variables: vec![
                    v("temperature", "degC", Mean),
                    v("streamflow", "m3/s", Mean),
                    v("water_level", "m", Mean),
                    v("rain", "mm", Sum),
                ],
                native_granularity: Span::minutes(5),
                publish_schedule: hourly.into(),
                stations: vec![],
            },
            DatasetDescriptor {
                source_id: "saih-piezometers".into(),
                field_area: "Coastal, River Basin".into(),
                start_date: date(2019, 12, 13),
                variables: vec![
                    v("temperature", "degC", Mean),
                    v("conductivity", "uS/cm", Mean),
                    v("piezometric_level", "msnm", Mean),
                    v("salinity", "PSU", Mean),
                    v("tds", "mg/l", Mean),
                ],
                native_granularity: Span::minutes(5),
                publish_schedule: hourly.into(),
                stations: vec![],
            },
            DatasetDescriptor {
                source_id: "sinqlair".into(),
                field_area: "Air, River Basin".into(),
                start_date: date(2022, 1, 1),
                variables: [
                    "o3", "no", "no2", "nox", "nh3", "nt", "co", "so2", "pm10", "benzene",
                    "toluene", "xylene",
                ]
                .iter()
                .map(|n| v(n, "ug/m3", Mean))
                .collect(),
                native_granularity: Span::hours(1),
                publish_schedule: hourly.into(),
                stations: vec![],
            },
            DatasetDescriptor {
                source_id: "waqi".into(),
                field_area: "Air, Spain".into(),
                start_date: None,
                variables: vec![v("aqi", "index", Mean)],
                native_granularity: Span::hours(1),
                publish_schedule: hourly.into(),
                stations: vec![],
            },
            DatasetDescriptor {
                source_id: "smartlagoon".into(),
                field_area: "Marine, Lagoon".into(),
                start_date: date(2022, 10, 14),
                variables: vec![
                    v("air_temperature", "degC", Mean),
                    v("relative_humidity", "%", Mean),
                    v("vapor_pressure", "kPa", Mean),
                    v("wind_speed", "m/s", Mean),
                    v("o2_concentration", "ug/L", Mean),
                    v("o2_saturation", "%", Mean),
                    v("conductivity", "uS/cm", Mean),
                    v("chlorophyll", "ug/L", Mean),
                    v("water_temperature", "degC", Mean),
                    v("water_temperature_sb", "degC", Mean),
                    v("water_temperature_ec1550", "degC", Mean),
                    v("conductivity_sb", "S/m", Mean),
                    v("pressure_sb", "MPa", Mean),
                    v("turbidity", "FTU", Mean),
                    v("depth", "m", Mean),
                ],
                native_granularity: Span::minutes(5),
                publish_schedule: hourly.into(),
                stations: vec![],
            },
            DatasetDescriptor {
                source_id: "sdc-upct".into(),
                field_area: "Marine, Lagoon".into(),
                start_date: date(2017, 3, 7),
                variables: vec![
                    v("temperature", "degC", Mean),
                    v("salinity", "PSU", Mean),
                    v("transparency", "m", Mean),
                    v("chlorophyll", "mg/m3", Mean),
                    v("oxygen", "mg/l", Mean),
                    v("turbidity", "FTU", Mean),
                    v("phycoerythrin", "ppm", Mean),
                    v("cdom", "ppb", Mean),
                    v("depth", "m", Mean),
                ],
                native_granularity: Span::days(7),
                publish_schedule: daily.into(),
                stations: vec![],
            },
            DatasetDescriptor {
                source_id: "ctd-imida".into(),
                field_area: "Marine, Lagoon".into(),
                start_date: date(2016, 6, 8),
                variables: vec![
                    v("temperature", "degC", Mean),
                    v("chlorophyll", "mg/m3", Mean),
                    v("conductivity", "S/m", Mean),
                    v("oxygen", "mg/l", Mean),
                    v("salinity", "PSU", Mean),
                    v("transparency", "m", Mean),
                    v("turbidity", "FTU", Mean),
                    v("organic_materials", "ppb", Mean),
                    v("ph", "pH", Mean),
                    v("depth", "m", Mean),
                ],
                native_granularity: Span::days(7),
                publish_schedule: daily.into(),
                stations: vec![],
            },
            DatasetDescriptor {
                source_id: "aemet".into(),
                field_area: "Weather, River Basin".into(),
                start_date: date(2023, 7, 26),
                variables: vec![
                    v("air_temperature", "degC", Mean),
                    v("relative_humidity", "%", Mean),
                    v("precipitation", "mm", Sum),
                ],
                native_granularity: Span::hours(1),
                publish_schedule: hourly.into(),
                stations: vec![],
            },
        ];
        let mut catalog = Catalog::new();
        for d in entries {
            catalog.register(d).expect("built-in catalog is valid");
        }
        catalog
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn saih() -> DatasetDescriptor {
        Catalog::lagoon().get("saih-catchments").unwrap().clone()
    }

    #[test]
    fn registers_and_retrieves_catchments() {
        let mut c = Catalog::new();
        let id = c.register(saih()).unwrap();
        assert_eq!(id, "saih-catchments");
        let d = c.get(&id).unwrap();
        assert_eq!(d.start_date, NaiveDate::from_ymd_opt(2016, 1, 8));
        assert_eq!(d.native_granularity, Span::minutes(5));
    }

    #[test]
    fn identical_registration_is_idempotent() {
        let mut c = Catalog::new();
        c.register(saih()).unwrap();
        let before = c.clone();
        assert_eq!(c.register(saih()).unwrap(), "saih-catchments");
        assert_eq!(c, before);
    }

    #[test]
    fn changed_unit_conflicts() {
        let mut c = Catalog::new();
        c.register(saih()).unwrap();
        let mut changed = saih();
        changed.variables[1].unit = "l/s".into();
        assert!(matches!(c.register(changed), Err(CoreError::Conflict(_))));
    }

    #[test]
    fn invalid_descriptors() {
        let mut d = saih();
        d.variables.clear();
        assert!(Catalog::new().register(d).is_err());
        let mut d = saih();
        d.native_granularity = Span::seconds(0);
        assert!(Catalog::new().register(d).is_err());
    }

    #[test]
    fn rain_sums_temperature_averages() {
        let c = Catalog::lagoon();
        let rain = c.series_key("saih-catchments", "06A01", "rain").unwrap();
        assert_eq!(c.aggregation(&rain), Aggregation::Sum);
        let t = c.series_key("saih-catchments", "06A01", "temperature").unwrap();
        assert_eq!(c.aggregation(&t), Aggregation::Mean);
        assert!(c.series_key("saih-catchments", "06A01", "salinity").is_none());
    }

    #[test]
    fn persists_one_document_per_source() {
        let dir = tempfile::tempdir().unwrap();
        let c = Catalog::lagoon();
        c.save_dir(dir.path()).unwrap();
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 8);
        assert_eq!(Catalog::load_dir(dir.path()).unwrap(), c);
    }
}
