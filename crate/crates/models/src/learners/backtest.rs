//! Rolling-origin backtests.
//!
//! The last `folds * fold_len` grid points form the evaluation region,
//! cut into consecutive folds. Fold `k` trains on everything before its
//! origin (or, with [`Refit::Once`], everything before the first origin)
//! and is scored from forecasts issued at origins `origin, origin+stride,
//! ...` inside the fold. A forecast for horizon `h` from origin `o` lands
//! on `o+h-1` and counts only when that slot lies inside the fold and holds
//! a real (not missing, not imputed) observation.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use twin_core::{MetricReport, Scalar};

use super::forecast::{ensure_filled, fit_global, Forecaster, LearnerSpec};
use crate::error::{ModelError, Result};
use crate::features::{AlignedSeries, LagSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refit {
    PerFold,
    Once,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub horizons: Vec<usize>,
    pub folds: usize,
    pub fold_len: usize,
    pub stride: usize,
    pub refit: Refit,
    /// Minimum grid points before the first origin.
    pub min_train: usize,
}

impl BacktestConfig {
    pub fn new(horizons: Vec<usize>, folds: usize, fold_len: usize) -> Self {
        BacktestConfig {
            horizons,
            folds,
            fold_len,
            stride: 1,
            refit: Refit::PerFold,
            min_train: 1,
        }
    }
}

/// Builds a fresh forecaster from training data that ends before an
/// origin.
pub trait ForecasterFactory<T: Scalar>: Sync {
    fn id(&self) -> String;

    /// Grid points needed to fit at all.
    fn min_history(&self) -> usize {
        1
    }

    fn fit(&self, series: &[AlignedSeries<T>], exog: &[AlignedSeries<T>]) -> Result<Box<dyn Forecaster<T>>>;
}

/// A named (lag spec, learner) pair fitted with [`fit_global`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub spec: LagSpec,
    pub learner: LearnerSpec,
}

impl<T: Scalar> ForecasterFactory<T> for Candidate {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn min_history(&self) -> usize {
        self.spec.lags + self.spec.horizons.horizons().into_iter().max().unwrap_or(1)
    }

    fn fit(&self, series: &[AlignedSeries<T>], exog: &[AlignedSeries<T>]) -> Result<Box<dyn Forecaster<T>>> {
        Ok(Box::new(fit_global(series, exog, &self.spec, &self.learner)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldBounds {
    /// Training data is strictly before this instant.
    pub train_end: DateTime<Utc>,
    pub origin: DateTime<Utc>,
    /// Exclusive.
    pub eval_end: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics<T> {
    pub horizon: usize,
    /// Mean over the folds in `per_fold`.
    pub metrics: MetricReport<T>,
    /// `None` where a fold had no scoreable point at this horizon.
    pub per_fold: Vec<Option<MetricReport<T>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport<T> {
    pub candidate: String,
    pub horizons: Vec<HorizonMetrics<T>>,
    pub folds: Vec<FoldBounds>,
    pub refit: Refit,
    pub champion: bool,
}

impl<T: Scalar> BacktestReport<T> {
    pub fn at(&self, horizon: usize) -> Option<&MetricReport<T>> {
        self.horizons.iter().find(|m| m.horizon == horizon).map(|m| &m.metrics)
    }
}

fn validate(cfg: &BacktestConfig, n: usize, min_history: usize) -> Result<usize> {
    if cfg.folds == 0 || cfg.stride == 0 {
        return Err(ModelError::usage("need at least one fold and a stride >= 1"));
    }
    if cfg.horizons.is_empty() || cfg.horizons.contains(&0) {
        return Err(ModelError::usage("horizons must be non-empty and >= 1"));
    }
    let mut sorted = cfg.horizons.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != cfg.horizons.len() {
        return Err(ModelError::usage("duplicate horizon"));
    }
    let max_h = sorted[sorted.len() - 1];
    if cfg.fold_len < max_h {
        return Err(ModelError::usage(format!(
            "fold of {} points is too short for horizon {max_h}",
            cfg.fold_len
        )));
    }
    let eval = cfg.folds * cfg.fold_len;
    let first_origin = n.checked_sub(eval).unwrap_or(0);
    let need = cfg.min_train.max(min_history);
    if eval > n || first_origin < need {
        return Err(ModelError::usage(format!(
            "{n} points cannot hold {} folds of {} after {need} training points",
            cfg.folds, cfg.fold_len
        )));
    }
    Ok(first_origin)
}

/// Runs the backtest of one candidate over a set of series sharing a grid.
/// Series may contain gaps; training data and forecast histories are
/// imputed from the data before each origin only.
pub fn backtest<T: Scalar>(
    factory: &dyn ForecasterFactory<T>,
    series: &[AlignedSeries<T>],
    exog: &[AlignedSeries<T>],
    cfg: &BacktestConfig,
) -> Result<BacktestReport<T>> {
    let Some(first) = series.first() else {
        return Err(ModelError::usage("no series to backtest"));
    };
    if let Some(s) = series.iter().chain(exog).find(|s| !s.same_grid(first)) {
        return Err(ModelError::usage(format!("{} is not on the shared grid", s.key.id())));
    }
    let n = first.len();
    let first_origin = validate(cfg, n, factory.min_history())?;
    let exog_full: Vec<Vec<T>> = exog
        .iter()
        .map(|e| ensure_filled(e).and_then(|f| f.require_filled()))
        .collect::<Result<_>>()?;
    let max_h = *cfg.horizons.iter().max().expect("validated");

    let mut folds = Vec::with_capacity(cfg.folds);
    // pooled[h][fold] = (actuals, predictions)
    let mut pooled: Vec<Vec<(Vec<T>, Vec<T>)>> = vec![Vec::new(); cfg.horizons.len()];
    let mut model: Option<Box<dyn Forecaster<T>>> = None;
    for k in 0..cfg.folds {
        let origin = first_origin + k * cfg.fold_len;
        let end = origin + cfg.fold_len;
        let train_end = match cfg.refit {
            Refit::PerFold => origin,
            Refit::Once => first_origin,
        };
        if cfg.refit == Refit::PerFold || model.is_none() {
            let train: Vec<_> = series.iter().map(|s| s.head(train_end)).collect();
            let train_exog: Vec<_> = exog.iter().map(|s| s.head(train_end)).collect();
            model = Some(factory.fit(&train, &train_exog)?);
        }
        let forecaster = model.as_ref().expect("fitted above");
        folds.push(FoldBounds {
            train_end: first.time_at(train_end),
            origin: first.time_at(origin),
            eval_end: first.time_at(end),
        });
        let mut fold_pairs = vec![(Vec::new(), Vec::new()); cfg.horizons.len()];
        let mut o = origin;
        while o < end {
            let heads: Vec<Vec<T>> = series
                .iter()
                .map(|s| ensure_filled(&s.head(o)).and_then(|f| f.require_filled()))
                .collect::<Result<_>>()?;
            let histories: Vec<&[T]> = heads.iter().map(Vec::as_slice).collect();
            let exog_future: Vec<Vec<T>> = exog_full
                .iter()
                .map(|e| e[o..(o + max_h).min(n)].to_vec())
                .collect();
            let preds = forecaster.predict(&histories, &exog_future, &cfg.horizons)?;
            for (hi, &h) in cfg.horizons.iter().enumerate() {
                let t = o + h - 1;
                if t >= end {
                    continue;
                }
                for (si, s) in series.iter().enumerate() {
                    if let (Some(v), false) = (s.values[t], s.imputed[t]) {
                        fold_pairs[hi].0.push(v);
                        fold_pairs[hi].1.push(preds[si][hi]);
                    }
                }
            }
            o += cfg.stride;
        }
        for (hi, pair) in fold_pairs.into_iter().enumerate() {
            pooled[hi].push(pair);
        }
    }

    let mut horizons = Vec::with_capacity(cfg.horizons.len());
    for (hi, &h) in cfg.horizons.iter().enumerate() {
        let per_fold: Vec<Option<MetricReport<T>>> = pooled[hi]
            .iter()
            .map(|(a, p)| if a.is_empty() { Ok(None) } else { MetricReport::evaluate(a, p).map(Some) })
            .collect::<std::result::Result<_, _>>()?;
        let present: Vec<MetricReport<T>> = per_fold.iter().flatten().copied().collect();
        let metrics = MetricReport::mean_of(&present)
            .ok_or_else(|| ModelError::usage(format!("no observed values to score at horizon {h}")))?;
        horizons.push(HorizonMetrics {
            horizon: h,
            metrics,
            per_fold,
        });
    }
    Ok(BacktestReport {
        candidate: factory.id(),
        horizons,
        folds,
        refit: cfg.refit,
        champion: false,
    })
}
