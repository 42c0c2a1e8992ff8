//! Boosted trees, the linear and persistence baselines, global
//! forecasting, backtests, search and champion selection.

mod backtest;
mod champion;
mod forecast;
mod gbrt;
mod linear;
pub mod model_file;
mod search;
mod tree;

pub use backtest::{backtest, BacktestConfig, BacktestReport, Candidate, FoldBounds, ForecasterFactory, HorizonMetrics, Refit};
pub use champion::{compare_candidates, mark_champion, select_champion};
pub use forecast::{fit_global, Forecaster, GlobalForecaster, LearnerSpec, Recipe, Regressor};
pub use gbrt::{fit_gbrt, GbrtModel, GbrtParams};
pub use linear::{fit_linear, LinearModel};
pub use model_file::{decode_forecaster, encode_forecaster, load_forecaster, save_forecaster};
pub use search::{search, search_with, HyperParams, RandomSampler, Sampler, SearchResult, SearchSpace, Trial};
pub use tree::{fit_tree, Node, Presorted, RegressionTree, TreeParams};

use crate::features::LagSpec;

/// Many shallow-ish trees with a small step.
pub fn deep_slow() -> GbrtParams {
    GbrtParams::new(200, 0.05, 6, 10)
}

/// Few shallow trees with a large step.
pub fn shallow_fast() -> GbrtParams {
    GbrtParams::new(80, 0.15, 3, 5)
}

/// The default candidate set for hourly recursive forecasting with `lags`
/// lags: both GBRT presets, the linear baseline and persistence.
pub fn default_candidates(lags: usize) -> Vec<Candidate> {
    let spec = LagSpec::recursive(lags);
    let c = |id: &str, learner| Candidate {
        id: id.into(),
        spec: spec.clone(),
        learner,
    };
    vec![
        c("gbrt-deep-slow", LearnerSpec::Gbrt(deep_slow())),
        c("gbrt-shallow-fast", LearnerSpec::Gbrt(shallow_fast())),
        c("linear", LearnerSpec::Linear),
        c("naive", LearnerSpec::Persistence),
    ]
}
