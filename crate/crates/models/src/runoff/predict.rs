use serde::{Deserialize, Serialize};
use twin_core::Scalar;

use super::dataset::{InputColumn, RunoffDataset};
use super::lstm::LstmNetwork;
use crate::error::{ModelError, Result};
use crate::features::{Matrix, RobustScaler};
use crate::fingerprint::Fnv;

/// Negative values become zero; so do NaN and `-0.0`.
pub fn clamp_nonnegative<T: Scalar>(values: &[T]) -> Vec<T> {
    values.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect()
}

/// Feature and target scalers fitted on the training partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalers<T> {
    pub features: RobustScaler<T>,
    pub target: RobustScaler<T>,
}

impl<T: Scalar> Scalers<T> {
    /// Features on the input rows the training windows touch, target on
    /// the training targets.
    pub fn fit(ds: &RunoffDataset<T>, train_ends: &[usize]) -> Result<Self> {
        let Some(&last) = train_ends.last() else {
            return Err(ModelError::usage("no training samples to fit scalers on"));
        };
        let rows: Vec<usize> = (0..=last).collect();
        let features = RobustScaler::fit(&ds.inputs.select_rows(&rows));
        let targets: Vec<T> = train_ends.iter().map(|&e| ds.target_for(e)).collect();
        let target = RobustScaler::fit_columns(&[targets]);
        Ok(Scalers { features, target })
    }

    pub fn version(&self) -> String {
        let mut h = Fnv::new();
        h.bytes(&self.features.fingerprint().to_le_bytes());
        h.bytes(&self.target.fingerprint().to_le_bytes());
        format!("{:016x}", h.finish())
    }

    pub fn scale_window(&self, window: &Matrix<T>) -> Matrix<T> {
        self.features.apply(window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunoffMeta {
    pub station: String,
    pub horizon: usize,
    pub window: usize,
    pub columns: Vec<InputColumn>,
    pub scaler_version: String,
    pub model_version: String,
}

impl RunoffMeta {
    pub fn has_variable(&self, variable: &str) -> bool {
        self.columns.iter().any(|c| c.variable == variable)
    }

    /// True when the model takes weather-forecast inputs.
    pub fn has_forecast_inputs(&self) -> bool {
        self.columns.iter().any(|c| c.is_exogenous() && c.variable != "rain")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunoffModel<T> {
    pub net: LstmNetwork<T>,
    pub scalers: Scalers<T>,
    pub meta: RunoffMeta,
}

impl<T: Scalar> RunoffModel<T> {
    pub fn predict(&self, window: &Matrix<T>) -> Result<T> {
        predict_streamflow(&self.net, &self.scalers, &self.meta, window, self.meta.horizon)
    }
}

pub(crate) fn model_version<T: Scalar>(net: &LstmNetwork<T>, scaler_version: &str) -> String {
    let mut h = Fnv::new();
    for p in net.params() {
        h.f64(p.as_f64());
    }
    h.bytes(scaler_version.as_bytes());
    format!("{:016x}", h.finish())
}

/// Scales a raw window, runs the network, inverts the target scaling and
/// clamps at zero.
pub fn predict_streamflow<T: Scalar>(
    net: &LstmNetwork<T>,
    scalers: &Scalers<T>,
    meta: &RunoffMeta,
    window: &Matrix<T>,
    horizon: usize,
) -> Result<T> {
    if scalers.version() != meta.scaler_version {
        return Err(ModelError::usage(format!(
            "scaler version {} does not match the model's {}",
            scalers.version(),
            meta.scaler_version
        )));
    }
    if horizon != meta.horizon {
        return Err(ModelError::usage(format!(
            "model predicts {} h ahead, not {horizon} h",
            meta.horizon
        )));
    }
    if window.rows() != meta.window || window.cols() != meta.columns.len() {
        return Err(ModelError::usage(format!(
            "window is {}x{}, model expects {}x{}",
            window.rows(),
            window.cols(),
            meta.window,
            meta.columns.len()
        )));
    }
    if scalers.features.width() != window.cols() {
        return Err(ModelError::usage("feature scaler width does not match the window"));
    }
    let raw = net.predict(&scalers.scale_window(window))?;
    Ok(clamp_nonnegative(&[scalers.target.invert_value(0, raw)])[0])
}
