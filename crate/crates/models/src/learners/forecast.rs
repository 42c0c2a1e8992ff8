//! Global forecasting: one model pooled over many series, applied
//! recursively (one-step model fed its own predictions) or directly (one
//! model per horizon).

use serde::{Deserialize, Serialize};
use twin_core::Scalar;

use super::gbrt::{fit_gbrt, GbrtModel, GbrtParams};
use super::linear::{fit_linear, LinearModel};
use crate::error::{ModelError, Result};
use crate::features::{build_lag_matrix, impute_linear, AlignedSeries, FeatureLayout, HorizonMode, LagSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Gbrt(GbrtParams),
    Linear,
    /// Predicts `lag_1`.
    Persistence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Regressor<T> {
    Gbrt(GbrtModel<T>),
    Linear(LinearModel<T>),
    Persistence,
}

impl<T: Scalar> Regressor<T> {
    pub fn predict_row(&self, row: &[T]) -> T {
        match self {
            Regressor::Gbrt(m) => m.predict_row(row),
            Regressor::Linear(m) => m.predict_row(row),
            Regressor::Persistence => row[0],
        }
    }
}

/// Predicts the requested horizons for every series from an origin.
/// `histories[k]` ends just before the origin; `exog_future[j][i]` is
/// exogenous series `j` at origin + `i` steps.
pub trait Forecaster<T: Scalar>: Send + Sync {
    fn predict(&self, histories: &[&[T]], exog_future: &[Vec<T>], horizons: &[usize]) -> Result<Vec<Vec<T>>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub layout: FeatureLayout,
    pub mode: HorizonMode,
    pub series_ids: Vec<String>,
    pub exog_ids: Vec<String>,
    pub learner: LearnerSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalForecaster<T> {
    pub recipe: Recipe,
    /// One model for recursive mode, one per horizon for direct mode.
    pub models: Vec<Regressor<T>>,
}

/// Fills gaps when there are any; gap-free series pass through.
pub(crate) fn ensure_filled<T: Scalar>(s: &AlignedSeries<T>) -> Result<AlignedSeries<T>> {
    if s.values.iter().all(Option::is_some) {
        Ok(s.clone())
    } else {
        impute_linear(s)
    }
}

pub fn fit_global<T: Scalar>(
    series: &[AlignedSeries<T>],
    exog: &[AlignedSeries<T>],
    spec: &LagSpec,
    learner: &LearnerSpec,
) -> Result<GlobalForecaster<T>> {
    let series: Vec<_> = series.iter().map(ensure_filled).collect::<Result<_>>()?;
    let exog: Vec<_> = exog.iter().map(ensure_filled).collect::<Result<_>>()?;
    let m = build_lag_matrix(&series, spec, &exog)?;
    if m.is_empty() {
        return Err(ModelError::usage(format!(
            "series of length {} too short for {} lags and horizons {:?}",
            series[0].len(),
            spec.lags,
            m.horizons
        )));
    }
    let mut models = Vec::with_capacity(m.horizons.len());
    for k in 0..m.horizons.len() {
        let y = m.target(k);
        models.push(match learner {
            LearnerSpec::Gbrt(p) => Regressor::Gbrt(fit_gbrt(&m.x, &y, &m.weights, p)?),
            LearnerSpec::Linear => Regressor::Linear(fit_linear(&m.x, &y, &m.weights)?),
            LearnerSpec::Persistence => Regressor::Persistence,
        });
    }
    Ok(GlobalForecaster {
        recipe: Recipe {
            layout: m.layout,
            mode: spec.horizons.clone(),
            series_ids: series.iter().map(|s| s.key.id()).collect(),
            exog_ids: exog.iter().map(|s| s.key.id()).collect(),
            learner: learner.clone(),
        },
        models,
    })
}

impl<T: Scalar> GlobalForecaster<T> {
    fn check(&self, histories: &[&[T]], exog_future: &[Vec<T>], steps: usize) -> Result<()> {
        let layout = &self.recipe.layout;
        if histories.len() != layout.n_series {
            return Err(ModelError::usage(format!(
                "model covers {} series, got {} histories",
                layout.n_series,
                histories.len()
            )));
        }
        if let Some(h) = histories.iter().find(|h| h.len() < layout.lags) {
            return Err(ModelError::usage(format!(
                "history of {} values is shorter than {} lags",
                h.len(),
                layout.lags
            )));
        }
        if exog_future.len() != layout.n_exog || exog_future.iter().any(|e| e.len() < steps) {
            return Err(ModelError::usage(format!(
                "model needs {} exogenous series covering {steps} steps",
                layout.n_exog
            )));
        }
        Ok(())
    }

    /// `horizon` steps per series, each step feeding the previous ones
    /// back as lags.
    pub fn recursive_forecast(&self, histories: &[&[T]], horizon: usize, exog_future: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        if self.recipe.mode != HorizonMode::Recursive {
            return Err(ModelError::usage("model was trained for direct horizons"));
        }
        self.check(histories, exog_future, horizon)?;
        let layout = &self.recipe.layout;
        let model = &self.models[0];
        let mut out = Vec::with_capacity(histories.len());
        for (k, h) in histories.iter().enumerate() {
            let mut buf: Vec<T> = h[h.len() - layout.lags..].to_vec();
            let mut preds = Vec::with_capacity(horizon);
            for step in 0..horizon {
                let exog_t: Vec<T> = exog_future.iter().map(|e| e[step]).collect();
                let p = model.predict_row(&layout.row(&buf, k, &exog_t));
                preds.push(p);
                buf.remove(0);
                buf.push(p);
            }
            out.push(preds);
        }
        Ok(out)
    }

    /// One value per trained horizon per series.
    pub fn direct_forecast(&self, histories: &[&[T]], exog_now: &[T]) -> Result<Vec<Vec<T>>> {
        if self.recipe.mode == HorizonMode::Recursive {
            return Err(ModelError::usage("model was trained for recursive forecasting"));
        }
        let exog: Vec<Vec<T>> = exog_now.iter().map(|v| vec![*v]).collect();
        self.check(histories, &exog, 1)?;
        let layout = &self.recipe.layout;
        Ok(histories
            .iter()
            .enumerate()
            .map(|(k, h)| {
                let row = layout.row(h, k, exog_now);
                self.models.iter().map(|m| m.predict_row(&row)).collect()
            })
            .collect())
    }
}

impl<T: Scalar> Forecaster<T> for GlobalForecaster<T> {
    fn predict(&self, histories: &[&[T]], exog_future: &[Vec<T>], horizons: &[usize]) -> Result<Vec<Vec<T>>> {
        match &self.recipe.mode {
            HorizonMode::Recursive => {
                let max_h = horizons.iter().copied().max().unwrap_or(0);
                let path = self.recursive_forecast(histories, max_h, exog_future)?;
                Ok(path.iter().map(|p| horizons.iter().map(|h| p[h - 1]).collect()).collect())
            }
            HorizonMode::Direct(trained) => {
                let cols: Vec<usize> = horizons
                    .iter()
                    .map(|h| {
                        trained
                            .iter()
                            .position(|t| t == h)
                            .ok_or_else(|| ModelError::usage(format!("model has no direct horizon {h}")))
                    })
                    .collect::<Result<_>>()?;
                let now: Vec<T> = exog_future.iter().map(|e| e.first().copied().unwrap_or_else(T::nan)).collect();
                let all = self.direct_forecast(histories, &now)?;
                Ok(all.iter().map(|p| cols.iter().map(|&c| p[c]).collect()).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use twin_core::time::Span;
    use twin_core::SeriesKey;

    fn series(values: &[f64]) -> AlignedSeries<f64> {
        let key = SeriesKey::new("s", "a", "temperature", "degC");
        AlignedSeries::complete(key, Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(), Span::hours(1), values)
    }

    #[test]
    fn persistence_repeats_last_value() {
        let f = fit_global(&[series(&[1.0, 2.0, 3.0, 4.0])], &[], &LagSpec::recursive(1), &LearnerSpec::Persistence).unwrap();
        assert_eq!(f.recursive_forecast(&[&[9.0, 5.0]], 3, &[]).unwrap(), vec![vec![5.0, 5.0, 5.0]]);
    }

    #[test]
    fn linear_doubling_recursion() {
        let v: Vec<f64> = (0..12).map(|i| 2f64.powi(i)).collect();
        let f = fit_global(&[series(&v)], &[], &LagSpec::recursive(1), &LearnerSpec::Linear).unwrap();
        let out = f.recursive_forecast(&[&[1.0]], 3, &[]).unwrap();
        for (got, want) in out[0].iter().zip([2.0, 4.0, 8.0]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn one_step_equals_direct_row() {
        let v: Vec<f64> = (0..40).map(|i| ((i * 13) % 7) as f64).collect();
        let f = fit_global(&[series(&v)], &[], &LagSpec::recursive(3), &LearnerSpec::Gbrt(GbrtParams::new(10, 0.3, 2, 1))).unwrap();
        let hist = &v[..20];
        let row = f.recipe.layout.row(hist, 0, &[]);
        assert_eq!(f.recursive_forecast(&[hist], 1, &[]).unwrap()[0][0], f.models[0].predict_row(&row));
    }

    #[test]
    fn missing_exog_is_usage_error() {
        let s = series(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let e = AlignedSeries { key: SeriesKey::new("s", "a", "rain", "mm"), ..s.clone() };
        let f = fit_global(&[s], &[e], &LagSpec::recursive(1), &LearnerSpec::Linear).unwrap();
        assert!(matches!(f.recursive_forecast(&[&[1.0]], 2, &[]), Err(ModelError::Usage(_))));
        assert!(f.recursive_forecast(&[&[1.0]], 2, &[vec![0.0]]).is_err());
        assert!(f.recursive_forecast(&[&[1.0]], 2, &[vec![0.0, 0.0]]).is_ok());
    }

    #[test]
    fn direct_horizons() {
        let v: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let spec = LagSpec {
            lags: 2,
            horizons: HorizonMode::Direct(vec![1, 3]),
            weight_mode: Default::default(),
        };
        let f = fit_global(&[series(&v)], &[], &spec, &LearnerSpec::Linear).unwrap();
        let out = f.predict(&[&v[..10]], &[], &[3]).unwrap();
        assert!((out[0][0] - 12.0).abs() < 1e-9);
        assert!(f.predict(&[&v[..10]], &[], &[2]).is_err());
    }
}
