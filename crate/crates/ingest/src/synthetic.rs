//! Seeded stand-in for live sources: level + daily sinusoid + AR(1) noise.
//!
//! Every (station, variable) stream owns a ChaCha8 generator on its own
//! stream number, so adding a station does not perturb the others. The
//! AR(1) state starts from its stationary distribution.

use std::f64::consts::TAU;

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use twin_core::time::{floor_to, Span};
use twin_core::{Observation, Quality, SeriesKey, StationMeta};

use crate::adapter::{FieldMapping, RawBatch, RawRecord, SourceAdapter};
use crate::error::{IngestError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticVariable {
    pub variable: String,
    pub unit: String,
    pub level: f64,
    pub amplitude: f64,
    pub ar: f64,
    pub noise_std: f64,
    #[serde(default)]
    pub missing_prob: f64,
}

impl SyntheticVariable {
    pub fn new(variable: &str, unit: &str, level: f64, amplitude: f64, ar: f64, noise_std: f64, missing_prob: f64) -> Self {
        SyntheticVariable {
            variable: variable.into(),
            unit: unit.into(),
            level,
            amplitude,
            ar,
            noise_std,
            missing_prob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub source_id: String,
    pub variables: Vec<SyntheticVariable>,
    pub stations: Vec<StationMeta>,
    pub granularity: Span,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(IngestError::Usage(m));
        if self.granularity.as_secs() <= 0 {
            return bad(format!("granularity must be positive, got {}", self.granularity));
        }
        if self.variables.is_empty() || self.stations.is_empty() {
            return bad("synthetic spec needs at least one variable and one station".into());
        }
        for v in &self.variables {
            if !(v.ar.abs() < 1.0) {
                return bad(format!("{}: AR coefficient {} is not in (-1, 1)", v.variable, v.ar));
            }
            if !(v.noise_std >= 0.0) || !v.noise_std.is_finite() {
                return bad(format!("{}: noise stddev must be finite and >= 0", v.variable));
            }
            if !(0.0..1.0).contains(&v.missing_prob) {
                return bad(format!("{}: missing probability {} is not in [0, 1)", v.variable, v.missing_prob));
            }
            if !v.level.is_finite() || !v.amplitude.is_finite() {
                return bad(format!("{}: level and amplitude must be finite", v.variable));
            }
        }
        Ok(())
    }

    pub fn mapping(&self) -> FieldMapping {
        FieldMapping::identity(self.variables.iter().map(|v| v.variable.as_str()))
    }
}

struct Stream {
    key: SeriesKey,
    var: SyntheticVariable,
    rng: ChaCha8Rng,
    state: f64,
}

impl Stream {
    fn new(seed: u64, index: u64, key: SeriesKey, var: SyntheticVariable) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let z: f64 = StandardNormal.sample(&mut rng);
        let stationary = var.noise_std / (1.0 - var.ar * var.ar).sqrt();
        Stream {
            key,
            state: z * stationary,
            var,
            rng,
        }
    }

    /// Advances one step; draws are consumed whether or not the point is
    /// dropped, so the missing pattern does not shift the noise path.
    fn step(&mut self, t: DateTime<Utc>) -> Option<f64> {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        let u: f64 = self.rng.random();
        self.state = self.var.ar * self.state + self.var.noise_std * z;
        let day_frac = t.timestamp().rem_euclid(86_400) as f64 / 86_400.0;
        let value = self.var.level + self.var.amplitude * (TAU * day_frac).sin() + self.state;
        (u >= self.var.missing_prob).then_some(value)
    }
}

/// Continuous generator: successive `advance_to` calls continue the same
/// AR paths.
pub struct Generator {
    streams: Vec<Stream>,
    step: Span,
    next: DateTime<Utc>,
}

impl Generator {
    /// First emitted point is the first grid instant at or after `from`.
    pub fn new(spec: &SyntheticSpec, from: DateTime<Utc>) -> Result<Self> {
        spec.validate()?;
        let mut streams = Vec::new();
        for (si, st) in spec.stations.iter().enumerate() {
            for (vi, v) in spec.variables.iter().enumerate() {
                let key = SeriesKey::new(&spec.source_id, &st.station_id, &v.variable, &v.unit);
                let index = (si * spec.variables.len() + vi) as u64;
                streams.push(Stream::new(spec.seed, index, key, v.clone()));
            }
        }
        let mut next = floor_to(from, spec.granularity);
        if next < from {
            next += spec.granularity.to_chrono();
        }
        Ok(Generator {
            streams,
            step: spec.granularity,
            next,
        })
    }

    /// Emits all grid points strictly before `to`, ordered by time then
    /// stream.
    pub fn advance_to(&mut self, to: DateTime<Utc>) -> Vec<Observation> {
        let mut out = Vec::new();
        let step: Duration = self.step.to_chrono();
        while self.next < to {
            let t = self.next;
            for s in &mut self.streams {
                if let Some(v) = s.step(t) {
                    out.push(Observation {
                        series: s.key.clone(),
                        timestamp: t,
                        value: v,
                        quality: Quality::Measured,
                        ingested_at: t,
                    });
                }
            }
            self.next += step;
        }
        out
    }
}

/// Observations on the grid in `[from, to)`, deterministic under the seed.
pub fn synthesize(spec: &SyntheticSpec, from: DateTime<Utc>, to: DateTime<Utc>) -> Result<Vec<Observation>> {
    if from >= to {
        return Err(IngestError::Usage(format!("empty range: {from} >= {to}")));
    }
    Ok(Generator::new(spec, from)?.advance_to(to))
}

/// Serves a synthetic spec through the adapter interface. The generator is
/// anchored just after the first poll's `since` and advanced on each poll.
pub struct SyntheticAdapter {
    spec: SyntheticSpec,
    mapping: FieldMapping,
    generator: Option<Generator>,
}

impl SyntheticAdapter {
    pub fn new(spec: SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        Ok(SyntheticAdapter {
            mapping: spec.mapping(),
            spec,
            generator: None,
        })
    }
}

impl SourceAdapter for SyntheticAdapter {
    fn source_id(&self) -> &str {
        &self.spec.source_id
    }

    fn mapping(&self) -> &FieldMapping {
        &self.mapping
    }

    fn poll(&mut self, since: DateTime<Utc>, now: DateTime<Utc>) -> Result<RawBatch> {
        if self.generator.is_none() {
            // Records strictly after `since`.
            self.generator = Some(Generator::new(&self.spec, since + Duration::seconds(1))?);
        }
        let generator = self.generator.as_mut().expect("initialized above");
        // Grid points up to and including `now`.
        let obs = generator.advance_to(now + Duration::seconds(1));
        Ok(RawBatch {
            records: obs
                .into_iter()
                .map(|o| RawRecord {
                    station_id: o.series.station_id,
                    field: o.series.variable,
                    timestamp: twin_core::time::rfc3339(o.timestamp),
                    value: o.value.to_string(),
                })
                .collect(),
            malformed: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use twin_core::time::parse_rfc3339;

    fn station(id: &str) -> StationMeta {
        StationMeta {
            station_id: id.into(),
            name: id.into(),
            latitude: 37.7,
            longitude: -0.8,
            source_id: "synthetic".into(),
        }
    }

    fn spec(var: SyntheticVariable) -> SyntheticSpec {
        SyntheticSpec {
            seed: 7,
            source_id: "synthetic".into(),
            variables: vec![var],
            stations: vec![station("S1")],
            granularity: Span::hours(1),
        }
    }

    fn t(s: &str) -> DateTime<Utc> {
        parse_rfc3339(s).unwrap()
    }

    fn bytes(obs: &[Observation]) -> Vec<u8> {
        obs.iter()
            .flat_map(|o| twin_store::window::format_line(o).into_bytes())
            .collect()
    }

    #[test]
    fn constant_when_everything_is_off() {
        let s = spec(SyntheticVariable::new("salinity", "psu", 42.5, 0.0, 0.5, 0.0, 0.0));
        let obs = synthesize(&s, t("2024-01-01T00:00:00Z"), t("2024-01-03T00:00:00Z")).unwrap();
        assert_eq!(obs.len(), 48);
        assert!(obs.iter().all(|o| o.value == 42.5));
    }

    #[test]
    fn same_seed_same_bytes() {
        let s = spec(SyntheticVariable::new("salinity", "psu", 42.0, 2.0, 0.9, 0.3, 0.1));
        let a = synthesize(&s, t("2024-01-01T00:00:00Z"), t("2024-02-01T00:00:00Z")).unwrap();
        let b = synthesize(&s, t("2024-01-01T00:00:00Z"), t("2024-02-01T00:00:00Z")).unwrap();
        assert_eq!(bytes(&a), bytes(&b));
        let mut other = s.clone();
        other.seed = 8;
        let c = synthesize(&other, t("2024-01-01T00:00:00Z"), t("2024-02-01T00:00:00Z")).unwrap();
        assert_ne!(bytes(&a), bytes(&c));
    }

    #[test]
    fn lag_one_autocorrelation_matches_coefficient() {
        let s = spec(SyntheticVariable::new("x", "1", 0.0, 0.0, 0.8, 1.0, 0.0));
        let from = t("2024-01-01T00:00:00Z");
        let obs = synthesize(&s, from, from + Duration::hours(10_000)).unwrap();
        let x: Vec<f64> = obs.iter().map(|o| o.value).collect();
        assert_eq!(x.len(), 10_000);
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        let cov: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        let r1 = cov / var;
        assert!((0.7..=0.9).contains(&r1), "r1 = {r1}");
    }

    #[test]
    fn missing_probability_drops_points() {
        let s = spec(SyntheticVariable::new("x", "1", 0.0, 1.0, 0.0, 1.0, 0.3));
        let from = t("2024-01-01T00:00:00Z");
        let obs = synthesize(&s, from, from + Duration::hours(5_000)).unwrap();
        let kept = obs.len() as f64 / 5_000.0;
        assert!((kept - 0.7).abs() < 0.03, "kept fraction {kept}");
    }

    #[test]
    fn invalid_specs_are_usage_errors() {
        let from = t("2024-01-01T00:00:00Z");
        let to = from + Duration::hours(1);
        for v in [
            SyntheticVariable::new("x", "1", 0.0, 0.0, 1.0, 1.0, 0.0),
            SyntheticVariable::new("x", "1", 0.0, 0.0, 0.5, -1.0, 0.0),
            SyntheticVariable::new("x", "1", 0.0, 0.0, 0.5, 1.0, 1.0),
        ] {
            assert!(matches!(synthesize(&spec(v), from, to), Err(IngestError::Usage(_))));
        }
        let ok = spec(SyntheticVariable::new("x", "1", 0.0, 0.0, 0.5, 1.0, 0.0));
        assert!(synthesize(&ok, to, from).is_err());
    }

    #[test]
    fn chunked_polls_continue_one_path() {
        let s = spec(SyntheticVariable::new("x", "1", 10.0, 1.0, 0.9, 0.5, 0.0));
        let from = t("2024-01-01T00:00:00Z");
        let whole = synthesize(&s, from, from + Duration::hours(24)).unwrap();
        let mut g = Generator::new(&s, from).unwrap();
        let mut parts = g.advance_to(from + Duration::hours(5));
        parts.extend(g.advance_to(from + Duration::hours(24)));
        assert_eq!(bytes(&whole), bytes(&parts));
    }

    #[test]
    fn adapter_emits_after_since_up_to_now_inclusive() {
        let s = spec(SyntheticVariable::new("x", "1", 1.0, 0.0, 0.0, 0.0, 0.0));
        let mut a = SyntheticAdapter::new(s.clone()).unwrap();
        let since = t("2024-01-01T00:00:00Z");
        let b = a.poll(since, since + Duration::hours(2)).unwrap();
        assert_eq!(b.records.len(), 2);
        assert_eq!(b.records[0].timestamp, "2024-01-01T01:00:00Z");
        assert_eq!(b.records[0].value, "1");
        let b = a.poll(since + Duration::hours(2), since + Duration::hours(3)).unwrap();
        assert_eq!(b.records.len(), 1);
        // A fresh adapter resuming from a saved instant does not repeat it.
        let mut resumed = SyntheticAdapter::new(s).unwrap();
        let b = resumed.poll(since + Duration::hours(3), since + Duration::hours(3)).unwrap();
        assert!(b.records.is_empty());
    }
}
