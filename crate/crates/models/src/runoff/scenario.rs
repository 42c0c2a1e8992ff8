use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use twin_core::Scalar;

use super::dataset::{EXOGENOUS_VARIABLES, STREAMFLOW};
use super::predict::{RunoffMeta, RunoffModel};
use crate::error::{ModelError, Result};
use crate::features::Matrix;

/// `{station, horizon, multipliers: {var: factor}, offsets: {var: value}}`.
/// Unlisted variables keep multiplier 1 and offset 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub station: String,
    pub horizon: usize,
    #[serde(default)]
    pub multipliers: BTreeMap<String, f64>,
    #[serde(default)]
    pub offsets: BTreeMap<String, f64>,
}

impl ScenarioSpec {
    pub fn identity(station: impl Into<String>, horizon: usize) -> Self {
        ScenarioSpec {
            station: station.into(),
            horizon,
            multipliers: BTreeMap::new(),
            offsets: BTreeMap::new(),
        }
    }

    /// Checks the perturbation against a model. Streamflow and unknown
    /// variables are usage errors; a known exogenous variable the model
    /// was trained without is [`ModelError::MissingInput`].
    pub fn validate(&self, meta: &RunoffMeta) -> Result<()> {
        if self.station != meta.station {
            return Err(ModelError::usage(format!(
                "model is for station {}, not {}",
                meta.station, self.station
            )));
        }
        for (var, m) in &self.multipliers {
            if !(m.is_finite() && *m >= 0.0) {
                return Err(ModelError::usage(format!("multiplier for {var} must be finite and >= 0")));
            }
        }
        if let Some((var, _)) = self.offsets.iter().find(|(_, o)| !o.is_finite()) {
            return Err(ModelError::usage(format!("offset for {var} must be finite")));
        }
        for var in self.multipliers.keys().chain(self.offsets.keys()) {
            if var == STREAMFLOW {
                return Err(ModelError::usage("streamflow inputs cannot be perturbed"));
            }
            if !EXOGENOUS_VARIABLES.contains(&var.as_str()) {
                return Err(ModelError::usage(format!(
                    "unknown variable {var}; expected one of {}",
                    EXOGENOUS_VARIABLES.join(", ")
                )));
            }
            if !meta.has_variable(var) {
                return Err(ModelError::MissingInput(var.clone()));
            }
        }
        Ok(())
    }

    /// Applies `x * multiplier + offset` in original units to every column
    /// of each listed variable.
    pub fn perturb<T: Scalar>(&self, meta: &RunoffMeta, window: &Matrix<T>) -> Result<Matrix<T>> {
        self.validate(meta)?;
        let mut out = window.clone();
        for (j, col) in meta.columns.iter().enumerate() {
            let m = self.multipliers.get(&col.variable);
            let o = self.offsets.get(&col.variable);
            if m.is_none() && o.is_none() {
                continue;
            }
            let (m, o) = (T::lit(*m.unwrap_or(&1.0)), T::lit(*o.unwrap_or(&0.0)));
            for i in 0..out.rows() {
                let v = out.get(i, j);
                out.row_mut(i)[j] = v * m + o;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub station: String,
    pub horizon: usize,
    pub baseline: f64,
    pub perturbed: f64,
    /// `perturbed - baseline`.
    pub delta: f64,
    pub model_version: String,
    pub scaler_version: String,
}

/// Predicts on `window` as given and perturbed, with the same model.
pub fn run_scenario<T: Scalar>(spec: &ScenarioSpec, model: &RunoffModel<T>, window: &Matrix<T>) -> Result<ScenarioResult> {
    let perturbed_window = spec.perturb(&model.meta, window)?;
    let baseline = model.predict(window)?.as_f64();
    let perturbed = model.predict(&perturbed_window)?.as_f64();
    Ok(ScenarioResult {
        station: spec.station.clone(),
        horizon: spec.horizon,
        baseline,
        perturbed,
        delta: perturbed - baseline,
        model_version: model.meta.model_version.clone(),
        scaler_version: model.meta.scaler_version.clone(),
    })
}
