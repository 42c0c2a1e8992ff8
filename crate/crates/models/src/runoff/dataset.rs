use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use twin_core::Scalar;

use crate::error::{ModelError, Result};
use crate::features::{split_sizes, Matrix, DEFAULT_FRACTIONS};

pub const STREAMFLOW: &str = "streamflow";
/// Variables a scenario may perturb.
pub const EXOGENOUS_VARIABLES: [&str; 4] = ["rain", "precipitation", "temperature", "humidity"];
pub const DEFAULT_WINDOW: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputColumn {
    /// e.g. `06A01/streamflow` or `aemet-7178I/precipitation`.
    pub name: String,
    pub variable: String,
}

impl InputColumn {
    pub fn new(name: impl Into<String>, variable: impl Into<String>) -> Self {
        InputColumn {
            name: name.into(),
            variable: variable.into(),
        }
    }

    pub fn is_exogenous(&self) -> bool {
        self.variable != STREAMFLOW
    }
}

/// Hourly input table in original units plus the target streamflow.
/// Sample `e` uses input rows `e-W+1 ..= e` and predicts `target[e+h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunoffDataset<T> {
    pub station: String,
    pub horizon: usize,
    pub window: usize,
    pub columns: Vec<InputColumn>,
    pub inputs: Matrix<T>,
    pub target: Vec<T>,
    pub times: Vec<DateTime<Utc>>,
}

/// Sample end indices of the chronological 70/10/20 partitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl<T: Scalar> RunoffDataset<T> {
    pub fn new(
        station: impl Into<String>,
        horizon: usize,
        window: usize,
        columns: Vec<InputColumn>,
        inputs: Matrix<T>,
        target: Vec<T>,
        times: Vec<DateTime<Utc>>,
    ) -> Result<Self> {
        if horizon == 0 || window == 0 {
            return Err(ModelError::usage("horizon and window must be >= 1"));
        }
        if columns.len() != inputs.cols() || columns.is_empty() {
            return Err(ModelError::usage(format!(
                "{} column descriptions for {} input columns",
                columns.len(),
                inputs.cols()
            )));
        }
        if let Some(c) = columns
            .iter()
            .find(|c| c.variable != STREAMFLOW && !EXOGENOUS_VARIABLES.contains(&c.variable.as_str()))
        {
            return Err(ModelError::usage(format!("unknown input variable {} in {}", c.variable, c.name)));
        }
        if target.len() != inputs.rows() || times.len() != inputs.rows() {
            return Err(ModelError::usage("inputs, target and times differ in length"));
        }
        if inputs.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(ModelError::usage("inputs must be gap-free and finite"));
        }
        if target.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(ModelError::usage("streamflow targets must be finite and >= 0"));
        }
        Ok(RunoffDataset {
            station: station.into(),
            horizon,
            window,
            columns,
            inputs,
            target,
            times,
        })
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn has_forecast_inputs(&self) -> bool {
        self.columns.iter().any(|c| c.variable != STREAMFLOW && c.variable != "rain")
    }

    /// All valid sample end indices, ascending.
    pub fn sample_ends(&self) -> std::ops::Range<usize> {
        let n = self.target.len();
        let lo = self.window - 1;
        let hi = n.saturating_sub(self.horizon).max(lo);
        lo..hi
    }

    pub fn window_rows(&self, end: usize) -> Matrix<T> {
        let d = self.width();
        let start = end + 1 - self.window;
        Matrix::from_vec(self.window, d, self.inputs.as_slice()[start * d..(end + 1) * d].to_vec())
    }

    pub fn target_for(&self, end: usize) -> T {
        self.target[end + self.horizon]
    }

    /// Naive persistence: the last observed target streamflow.
    pub fn persistence_for(&self, end: usize) -> T {
        self.target[end]
    }

    pub fn split(&self) -> Result<SampleSplit> {
        let ends: Vec<usize> = self.sample_ends().collect();
        let [tr, va, _] = split_sizes(ends.len(), DEFAULT_FRACTIONS)?;
        Ok(SampleSplit {
            train: ends[..tr].to_vec(),
            validation: ends[tr..tr + va].to_vec(),
            test: ends[tr + va..].to_vec(),
        })
    }
}
