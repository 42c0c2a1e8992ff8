use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use twin_core::Scalar;

use super::aligned::AlignedSeries;
use super::matrix::Matrix;
use crate::error::{ModelError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "horizons")]
pub enum HorizonMode {
    /// One target, `y_t`; longer horizons by feeding predictions back.
    Recursive,
    /// One target column per listed horizon `h`, holding `y_{t+h-1}`.
    Direct(Vec<usize>),
}

impl HorizonMode {
    pub fn horizons(&self) -> Vec<usize> {
        match self {
            HorizonMode::Recursive => vec![1],
            HorizonMode::Direct(h) => h.clone(),
        }
    }
}

/// Which rows get weight 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// A row is zero-weighted when any of its targets is imputed.
    #[default]
    TargetOnly,
    /// ... or when any lag or exogenous input is imputed too.
    AnyTouch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagSpec {
    pub lags: usize,
    pub horizons: HorizonMode,
    #[serde(default)]
    pub weight_mode: WeightMode,
}

impl LagSpec {
    pub fn recursive(lags: usize) -> Self {
        LagSpec {
            lags,
            horizons: HorizonMode::Recursive,
            weight_mode: WeightMode::TargetOnly,
        }
    }
}

/// Column layout shared by matrix construction and forecasting:
/// `[y_{t-1} .. y_{t-L}, one-hot(series) (only with >1 series), exog_t]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub lags: usize,
    pub n_series: usize,
    pub n_exog: usize,
}

impl FeatureLayout {
    pub fn one_hot_width(&self) -> usize {
        if self.n_series > 1 {
            self.n_series
        } else {
            0
        }
    }

    pub fn width(&self) -> usize {
        self.lags + self.one_hot_width() + self.n_exog
    }

    /// `history` ends at `y_{t-1}`; needs at least `lags` values.
    pub fn row<T: Scalar>(&self, history: &[T], series: usize, exog: &[T]) -> Vec<T> {
        debug_assert!(history.len() >= self.lags && exog.len() == self.n_exog);
        let mut row = Vec::with_capacity(self.width());
        row.extend(history.iter().rev().take(self.lags));
        for j in 0..self.one_hot_width() {
            row.push(if j == series { T::one() } else { T::zero() });
        }
        row.extend_from_slice(exog);
        row
    }

    pub fn names(&self, series_ids: &[String], exog_ids: &[String]) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.lags).map(|k| format!("lag_{k}")).collect();
        if self.one_hot_width() > 0 {
            names.extend(series_ids.iter().map(|s| format!("is:{s}")));
        }
        names.extend(exog_ids.iter().map(|s| format!("exog:{s}")));
        names
    }
}

/// Rows are ordered by time, then by series index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix<T> {
    pub layout: FeatureLayout,
    pub x: Matrix<T>,
    pub y: Matrix<T>,
    pub weights: Vec<T>,
    pub times: Vec<DateTime<Utc>>,
    pub series: Vec<usize>,
    pub feature_names: Vec<String>,
    pub horizons: Vec<usize>,
}

impl<T: Scalar> DesignMatrix<T> {
    pub fn rows(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        DesignMatrix {
            layout: self.layout.clone(),
            x: self.x.select_rows(idx),
            y: self.y.select_rows(idx),
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
            times: idx.iter().map(|&i| self.times[i]).collect(),
            series: idx.iter().map(|&i| self.series[i]).collect(),
            feature_names: self.feature_names.clone(),
            horizons: self.horizons.clone(),
        }
    }

    /// Target column `k` as a vector.
    pub fn target(&self, k: usize) -> Vec<T> {
        self.y.column(k)
    }
}

/// Builds the pooled design matrix. Every series and exogenous series must
/// be gap-free and share one grid. A lag count at or beyond the series
/// length gives an empty matrix.
pub fn build_lag_matrix<T: Scalar>(
    series: &[AlignedSeries<T>],
    spec: &LagSpec,
    exog: &[AlignedSeries<T>],
) -> Result<DesignMatrix<T>> {
    if spec.lags == 0 {
        return Err(ModelError::usage("lag count must be at least 1"));
    }
    let Some(first) = series.first() else {
        return Err(ModelError::usage("no series to build a matrix from"));
    };
    if let Some(s) = series.iter().chain(exog).find(|s| !s.same_grid(first)) {
        return Err(ModelError::usage(format!("{} is not on the shared grid", s.key.id())));
    }
    let horizons = spec.horizons.horizons();
    if horizons.is_empty() || horizons.contains(&0) {
        return Err(ModelError::usage("horizons must be non-empty and >= 1"));
    }
    let values: Vec<Vec<T>> = series.iter().map(|s| s.require_filled()).collect::<Result<_>>()?;
    let exog_values: Vec<Vec<T>> = exog.iter().map(|s| s.require_filled()).collect::<Result<_>>()?;

    let layout = FeatureLayout {
        lags: spec.lags,
        n_series: series.len(),
        n_exog: exog.len(),
    };
    let ids: Vec<String> = series.iter().map(|s| s.key.id()).collect();
    let exog_ids: Vec<String> = exog.iter().map(|s| s.key.id()).collect();
    let n = first.len();
    let max_h = *horizons.iter().max().expect("non-empty");

    let mut x = Matrix::empty(layout.width());
    let mut y = Matrix::empty(horizons.len());
    let mut weights = Vec::new();
    let mut times = Vec::new();
    let mut row_series = Vec::new();
    // Row at time t needs t >= L and t + max_h - 1 < n.
    let last_t = (n + 1).checked_sub(max_h);
    for t in spec.lags..last_t.unwrap_or(0) {
        let exog_t: Vec<T> = exog_values.iter().map(|e| e[t]).collect();
        for (k, s) in series.iter().enumerate() {
            x.push_row(&layout.row(&values[k][..t], k, &exog_t));
            let targets: Vec<T> = horizons.iter().map(|h| values[k][t + h - 1]).collect();
            y.push_row(&targets);
            let mut zero = horizons.iter().any(|h| s.imputed[t + h - 1]);
            if spec.weight_mode == WeightMode::AnyTouch {
                zero |= s.imputed[t - spec.lags..t].iter().any(|&b| b);
                zero |= exog.iter().any(|e| e.imputed[t]);
            }
            weights.push(if zero { T::zero() } else { T::one() });
            times.push(first.time_at(t));
            row_series.push(k);
        }
    }
    Ok(DesignMatrix {
        feature_names: layout.names(&ids, &exog_ids),
        layout,
        x,
        y,
        weights,
        times,
        series: row_series,
        horizons,
    })
}
