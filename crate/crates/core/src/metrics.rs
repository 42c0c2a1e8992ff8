//! Point-forecast error metrics.
//!
//! CVRMSE divides by the mean of the actual series. When that mean is
//! within [`NEAR_ZERO_MEAN`] of zero (intermittent streamflow, for example)
//! the ratio is meaningless and is reported as absent.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

pub const NEAR_ZERO_MEAN: f64 = 1e-12;

fn check<T: Scalar>(actual: &[T], predicted: &[T]) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(CoreError::usage(format!(
            "length mismatch: {} actual vs {} predicted",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(CoreError::usage("metrics need at least one point"));
    }
    if actual.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(CoreError::usage("metrics inputs must be finite"));
    }
    Ok(())
}

pub fn mae<T: Scalar>(actual: &[T], predicted: &[T]) -> Result<T> {
    check(actual, predicted)?;
    let total: T = actual
        .iter()
        .zip(predicted)
        .map(|(&a, &p)| (a - p).abs())
        .sum();
    Ok(total / T::from_usize_lossy(actual.len()))
}

pub fn rmse<T: Scalar>(actual: &[T], predicted: &[T]) -> Result<T> {
    check(actual, predicted)?;
    let sse: T = actual
        .iter()
        .zip(predicted)
        .map(|(&a, &p)| (a - p) * (a - p))
        .sum();
    Ok((sse / T::from_usize_lossy(actual.len())).sqrt())
}

/// `100 * rmse / mean(actual)`, in percent; `None` for a near-zero mean.
pub fn cvrmse<T: Scalar>(actual: &[T], predicted: &[T]) -> Result<Option<T>> {
    let rmse = rmse(actual, predicted)?;
    let mean = actual.iter().copied().sum::<T>() / T::from_usize_lossy(actual.len());
    if mean.abs() < T::lit(NEAR_ZERO_MEAN) {
        return Ok(None);
    }
    Ok(Some(T::lit(100.0) * rmse / mean))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport<T> {
    pub mae: T,
    /// Percent; absent when the actuals average to (nearly) zero.
    pub cvrmse: Option<T>,
    pub n: usize,
}

impl<T: Scalar> MetricReport<T> {
    pub fn evaluate(actual: &[T], predicted: &[T]) -> Result<Self> {
        Ok(MetricReport {
            mae: mae(actual, predicted)?,
            cvrmse: cvrmse(actual, predicted)?,
            n: actual.len(),
        })
    }

    /// Mean of per-fold reports: MAE is averaged, CVRMSE is averaged over
    /// the folds where it is present, and counts add up.
    pub fn mean_of(reports: &[MetricReport<T>]) -> Option<Self> {
        if reports.is_empty() {
            return None;
        }
        let k = T::from_usize_lossy(reports.len());
        let mae = reports.iter().map(|r| r.mae).sum::<T>() / k;
        let present: Vec<T> = reports.iter().filter_map(|r| r.cvrmse).collect();
        let cvrmse = if present.is_empty() {
            None
        } else {
            Some(present.iter().copied().sum::<T>() / T::from_usize_lossy(present.len()))
        };
        Some(MetricReport {
            mae,
            cvrmse,
            n: reports.iter().map(|r| r.n).sum(),
        })
    }
}
