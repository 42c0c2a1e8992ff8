//! Rainfall to streamflow: the LSTM, its training loop, prediction with
//! the training scalers, and what-if scenarios.

mod dataset;
pub mod fixture;
mod lstm;
mod predict;
mod scenario;
mod train;
mod weights;

pub use dataset::{InputColumn, RunoffDataset, SampleSplit, DEFAULT_WINDOW, EXOGENOUS_VARIABLES, STREAMFLOW};
pub use lstm::{gradient_check, loss_and_grad, param_count, Cache, LstmNetwork, ParamLayout, DENSE1, DENSE2, PAPER_HIDDEN};
pub use predict::{clamp_nonnegative, predict_streamflow, RunoffMeta, RunoffModel, Scalers};
pub use scenario::{run_scenario, ScenarioResult, ScenarioSpec};
pub use train::{fit_runoff, train, EpochStats, RunoffReport, TrainConfig, Trained};
pub use weights::{decode_runoff, encode_runoff, load_runoff, save_runoff};
