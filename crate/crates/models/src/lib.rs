//! Forecasting models for the lagoon twin.
//!
//! * [`features`]: aligned grids, sparsity filter, linear imputation, lag
//!   matrices, chronological splits and robust scaling.
//! * [`learners`]: gradient-boosted regression trees, a linear baseline and
//!   persistence, global recursive/direct forecasting, rolling-origin
//!   backtests, random hyperparameter search and champion selection.
//! * [`runoff`]: the LSTM rainfall to streamflow model, its training loop
//!   and the what-if scenario engine.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the rest of the platform uses.

pub mod error;
pub mod features;
mod binfmt;
mod fingerprint;
pub mod learners;
pub mod pipeline;
pub mod runoff;

pub use error::{ModelError, Result};
pub use twin_core::Scalar;

pub type AlignedSeriesF64 = features::AlignedSeries<f64>;
pub type DesignMatrixF64 = features::DesignMatrix<f64>;
pub type RobustScalerF64 = features::RobustScaler<f64>;
pub type RegressionTreeF64 = learners::RegressionTree<f64>;
pub type GbrtModelF64 = learners::GbrtModel<f64>;
pub type LinearModelF64 = learners::LinearModel<f64>;
pub type GlobalForecasterF64 = learners::GlobalForecaster<f64>;
pub type BacktestReportF64 = learners::BacktestReport<f64>;
pub type LstmNetworkF64 = runoff::LstmNetwork<f64>;
pub type RunoffModelF64 = runoff::RunoffModel<f64>;

pub type AlignedSeriesF32 = features::AlignedSeries<f32>;
pub type GbrtModelF32 = learners::GbrtModel<f32>;
pub type LstmNetworkF32 = runoff::LstmNetwork<f32>;
