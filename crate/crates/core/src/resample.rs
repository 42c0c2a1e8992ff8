use chrono::{DateTime, Utc};

use crate::error::{CoreError, Result};
use crate::time::{floor_to, Span};
use crate::types::{Aggregation, Observation, Quality};

/// Re-grids one series onto epoch-aligned buckets of width `step`.
///
/// Each bucket containing at least one usable reading yields one point
/// stamped at the bucket start; empty buckets produce nothing. Rejected
/// readings are ignored. A bucket is `imputed` only if every contributing
/// reading was imputed.
pub fn resample(
    observations: &[Observation],
    step: Span,
    aggregation: Aggregation,
) -> Result<Vec<Observation>> {
    if step.as_secs() <= 0 {
        return Err(CoreError::usage("resample step must be positive"));
    }
    let Some(first) = observations.first() else {
        return Ok(Vec::new());
    };
    for w in observations.windows(2) {
        if w[1].timestamp < w[0].timestamp {
            return Err(CoreError::usage(format!(
                "resample input not sorted: {} after {}",
                w[1].timestamp, w[0].timestamp
            )));
        }
        if !w[1].series.same_series(&first.series) {
            return Err(CoreError::usage("resample input mixes series"));
        }
    }

    let mut out = Vec::new();
    let mut bucket: Option<Bucket> = None;
    for obs in observations.iter().filter(|o| o.quality != Quality::Rejected) {
        let start = floor_to(obs.timestamp, step);
        match &mut bucket {
            Some(b) if b.start == start => b.push(obs),
            _ => {
                if let Some(b) = bucket.take() {
                    out.push(b.finish(first, aggregation)?);
                }
                let mut b = Bucket::new(start);
                b.push(obs);
                bucket = Some(b);
            }
        }
    }
    if let Some(b) = bucket {
        out.push(b.finish(first, aggregation)?);
    }
    Ok(out)
}

struct Bucket {
    start: DateTime<Utc>,
    sum: f64,
    last: f64,
    count: usize,
    all_imputed: bool,
    ingested_at: DateTime<Utc>,
}

impl Bucket {
    fn new(start: DateTime<Utc>) -> Self {
        Bucket {
            start,
            sum: 0.0,
            last: 0.0,
            count: 0,
            all_imputed: true,
            ingested_at: start,
        }
    }

    fn push(&mut self, obs: &Observation) {
        self.sum += obs.value;
        self.last = obs.value;
        self.count += 1;
        self.all_imputed &= obs.quality == Quality::Imputed;
        self.ingested_at = self.ingested_at.max(obs.ingested_at);
    }

    fn finish(self, template: &Observation, aggregation: Aggregation) -> Result<Observation> {
        let value = match aggregation {
            Aggregation::Mean => self.sum / self.count as f64,
            Aggregation::Last => self.last,
            Aggregation::Sum => self.sum,
        };
        let quality = if self.all_imputed {
            Quality::Imputed
        } else {
            Quality::Measured
        };
        Observation::new(
            template.series.clone(),
            self.start,
            value,
            quality,
            self.ingested_at,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::parse_rfc3339;
    use crate::types::SeriesKey;

    fn obs(ts: &str, v: f64) -> Observation {
        let key = SeriesKey::new("saih-catchments", "06A01", "rain", "mm");
        Observation::measured(key, parse_rfc3339(ts).unwrap(), v).unwrap()
    }

    #[test]
    fn hourly_mean_of_two_points() {
        let input = [obs("2024-01-01T10:00:00Z", 2.0), obs("2024-01-01T10:05:00Z", 4.0)];
        let out = resample(&input, Span::hours(1), Aggregation::Mean).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].timestamp, parse_rfc3339("2024-01-01T10:00:00Z").unwrap());
        assert_eq!(out[0].value, 3.0);
    }

    #[test]
    fn single_point_moves_to_bucket_start() {
        let out = resample(&[obs("2024-01-01T10:20:00Z", 7.0)], Span::hours(1), Aggregation::Last)
            .unwrap();
        assert_eq!(out[0].timestamp, parse_rfc3339("2024-01-01T10:00:00Z").unwrap());
        assert_eq!(out[0].value, 7.0);
    }

    #[test]
    fn rain_sum_within_hour() {
        let input = [
            obs("2024-01-01T10:00:00Z", 0.5),
            obs("2024-01-01T10:05:00Z", 0.5),
            obs("2024-01-01T10:55:00Z", 1.0),
        ];
        let out = resample(&input, Span::hours(1), Aggregation::Sum).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].value, 2.0);
    }

    #[test]
    fn empty_buckets_are_absent() {
        let input = [obs("2024-01-01T10:00:00Z", 1.0), obs("2024-01-01T13:00:00Z", 2.0)];
        let out = resample(&input, Span::hours(1), Aggregation::Mean).unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn unsorted_is_usage_error() {
        let input = [obs("2024-01-01T11:00:00Z", 1.0), obs("2024-01-01T10:00:00Z", 2.0)];
        assert!(resample(&input, Span::hours(1), Aggregation::Mean).is_err());
    }

    #[test]
    fn aligned_last_is_idempotent() {
        let input: Vec<_> = (0..24)
            .map(|h| obs(&format!("2024-01-01T{h:02}:00:00Z"), h as f64 * 0.25))
            .collect();
        let once = resample(&input, Span::hours(1), Aggregation::Last).unwrap();
        assert_eq!(once, input);
        let twice = resample(&once, Span::hours(1), Aggregation::Last).unwrap();
        assert_eq!(twice, once);
    }
}
