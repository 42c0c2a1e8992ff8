use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use twin_core::time::{floor_to, Span};
use twin_core::{resample, Aggregation, Observation, Quality, Scalar, SeriesKey};

use crate::error::{ModelError, Result};

/// A series on a regular grid. `None` marks a missing slot; `imputed[i]`
/// is true exactly where imputation filled slot `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedSeries<T> {
    pub key: SeriesKey,
    pub start: DateTime<Utc>,
    pub step: Span,
    pub values: Vec<Option<T>>,
    pub imputed: Vec<bool>,
}

impl<T: Scalar> AlignedSeries<T> {
    pub fn new(key: SeriesKey, start: DateTime<Utc>, step: Span, values: Vec<Option<T>>) -> Self {
        let imputed = vec![false; values.len()];
        AlignedSeries {
            key,
            start,
            step,
            values,
            imputed,
        }
    }

    /// A gap-free series; convenient for fixtures.
    pub fn complete(key: SeriesKey, start: DateTime<Utc>, step: Span, values: &[T]) -> Self {
        Self::new(key, start, step, values.iter().map(|v| Some(*v)).collect())
    }

    /// Resamples `obs` to `step` with `agg` and places the buckets on the
    /// grid `start + i*step`, `i < len`. `start` must be on the step grid.
    /// Imputed-quality observations keep their flag.
    pub fn from_observations(
        key: SeriesKey,
        obs: &[Observation],
        start: DateTime<Utc>,
        step: Span,
        len: usize,
        agg: Aggregation,
    ) -> Result<Self> {
        if floor_to(start, step) != start {
            return Err(ModelError::usage(format!("grid start {start} is not aligned to {step}")));
        }
        let buckets = resample(obs, step, agg)?;
        let mut s = Self::new(key, start, step, vec![None; len]);
        for b in buckets {
            let Some(i) = s.index_of(b.timestamp) else { continue };
            s.values[i] = Some(T::lit(b.value));
            s.imputed[i] = b.quality == Quality::Imputed;
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time_at(&self, i: usize) -> DateTime<Utc> {
        self.start + chrono::Duration::seconds(self.step.as_secs() * i as i64)
    }

    pub fn index_of(&self, t: DateTime<Utc>) -> Option<usize> {
        let d = (t - self.start).num_seconds();
        let s = self.step.as_secs();
        if d < 0 || d % s != 0 {
            return None;
        }
        let i = (d / s) as usize;
        (i < self.len()).then_some(i)
    }

    pub fn same_grid(&self, other: &AlignedSeries<T>) -> bool {
        self.start == other.start && self.step == other.step && self.len() == other.len()
    }

    pub fn present(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Missing fraction between the first and last present value; a series
    /// with nothing present counts as fully missing.
    pub fn missing_fraction(&self) -> f64 {
        let first = self.values.iter().position(Option::is_some);
        let last = self.values.iter().rposition(Option::is_some);
        match (first, last) {
            (Some(a), Some(b)) => {
                let span = &self.values[a..=b];
                let missing = span.iter().filter(|v| v.is_none()).count();
                missing as f64 / span.len() as f64
            }
            _ => 1.0,
        }
    }

    /// Values if no slot is missing.
    pub fn filled(&self) -> Option<Vec<T>> {
        self.values.iter().copied().collect()
    }

    pub fn require_filled(&self) -> Result<Vec<T>> {
        self.filled()
            .ok_or_else(|| ModelError::usage(format!("{} still has missing values; impute first", self.key.id())))
    }

    /// The first `n` slots.
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.len());
        AlignedSeries {
            key: self.key.clone(),
            start: self.start,
            step: self.step,
            values: self.values[..n].to_vec(),
            imputed: self.imputed[..n].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dropped {
    pub series: SeriesKey,
    pub missing_fraction: f64,
}

/// Removes series whose missing fraction is strictly above `threshold`.
pub fn drop_sparse<T: Scalar>(series: Vec<AlignedSeries<T>>, threshold: f64) -> (Vec<AlignedSeries<T>>, Vec<Dropped>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for s in series {
        let f = s.missing_fraction();
        if f > threshold {
            dropped.push(Dropped {
                series: s.key.clone(),
                missing_fraction: f,
            });
        } else {
            kept.push(s);
        }
    }
    (kept, dropped)
}
