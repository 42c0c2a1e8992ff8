//! The per-variable forecasting chain: sparsity filter, imputation, lag
//! matrix with zero-weighted imputed targets, chronological split, optional
//! hyperparameter search on the validation block, rolling-origin backtests
//! of every candidate over the test block, and champion selection.

use serde::{Deserialize, Serialize};
use twin_core::time::Span;

use crate::error::{ModelError, Result};
use crate::features::{
    build_lag_matrix, chrono_split, drop_sparse, impute_linear, AlignedSeries, Dropped, HorizonMode, LagSpec, WeightMode,
    DEFAULT_FRACTIONS, HOURLY_LAGS, WEEKLY_LAGS,
};
use crate::learners::{
    backtest, default_candidates, fit_gbrt, fit_global, mark_champion, search, BacktestConfig, BacktestReport, Candidate,
    GlobalForecaster, LearnerSpec, Refit, SearchResult, SearchSpace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Hourly grid, recursive, horizons 1, 6, 12 and 24 hours.
    Hourly,
    /// Weekly grid, direct, horizons 7, 14, 21 and 28 days.
    Weekly,
}

impl Regime {
    pub fn step(self) -> Span {
        match self {
            Regime::Hourly => Span::hours(1),
            Regime::Weekly => Span::days(7),
        }
    }

    /// Horizons in grid steps.
    pub fn horizons(self) -> Vec<usize> {
        match self {
            Regime::Hourly => vec![1, 6, 12, 24],
            Regime::Weekly => vec![1, 2, 3, 4],
        }
    }

    pub fn lag_spec(self) -> LagSpec {
        match self {
            Regime::Hourly => LagSpec::recursive(HOURLY_LAGS),
            Regime::Weekly => LagSpec {
                lags: WEEKLY_LAGS,
                horizons: HorizonMode::Direct(self.horizons()),
                weight_mode: WeightMode::TargetOnly,
            },
        }
    }

    pub fn label(self, h: usize) -> String {
        match self {
            Regime::Hourly => format!("{h}h"),
            Regime::Weekly => format!("{}d", 7 * h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub regime: Regime,
    pub drop_threshold: f64,
    pub folds: usize,
    pub stride: usize,
    pub refit: Refit,
    /// Random-search trials; 0 skips the searched candidate.
    pub search_budget: usize,
    pub seed: u64,
    pub primary_horizon: usize,
    /// Defaults to both GBRT presets, linear and persistence.
    pub candidates: Option<Vec<Candidate>>,
}

impl PipelineConfig {
    pub fn new(regime: Regime) -> Self {
        PipelineConfig {
            regime,
            drop_threshold: 0.5,
            folds: 3,
            stride: 1,
            refit: Refit::PerFold,
            search_budget: 0,
            seed: 0,
            primary_horizon: 1,
            candidates: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub kept: Vec<String>,
    pub dropped: Vec<Dropped>,
    /// Design-matrix rows in train, validation and test.
    pub split_rows: [usize; 3],
    pub search: Option<SearchResult>,
    pub reports: Vec<BacktestReport<f64>>,
    pub champion: String,
    /// The champion refitted on every retained series in full.
    pub model: GlobalForecaster<f64>,
    pub candidates: Vec<Candidate>,
}

pub fn run_pipeline(series: Vec<AlignedSeries<f64>>, cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let (kept, dropped) = drop_sparse(series, cfg.drop_threshold);
    for d in &dropped {
        tracing::info!(series = %d.series, missing = d.missing_fraction, "dropped sparse series");
    }
    if kept.is_empty() {
        return Err(ModelError::usage("every series was dropped as too sparse"));
    }
    let imputed: Vec<_> = kept.iter().map(impute_linear).collect::<Result<_>>()?;
    let spec = cfg.regime.lag_spec();
    let matrix = build_lag_matrix(&imputed, &spec, &[])?;
    let split = chrono_split(&matrix, DEFAULT_FRACTIONS)?;
    let split_rows = [split.train.rows(), split.val.rows(), split.test.rows()];

    let mut candidates = cfg.candidates.clone().unwrap_or_else(|| match cfg.regime {
        Regime::Hourly => default_candidates(spec.lags),
        Regime::Weekly => default_candidates(spec.lags)
            .into_iter()
            .map(|c| Candidate {
                spec: spec.clone(),
                ..c
            })
            .collect(),
    });

    let search_result = if cfg.search_budget > 0 {
        let (train, val) = (&split.train, &split.val);
        let mut objective = |p: &crate::learners::HyperParams| -> Result<f64> {
            let mut total = 0.0;
            for k in 0..train.horizons.len() {
                let model = fit_gbrt(&train.x, &train.target(k), &train.weights, &p.gbrt())?;
                let y = val.target(k);
                let (mut err, mut n) = (0.0, 0.0);
                for i in 0..val.rows() {
                    if val.weights[i] > 0.0 {
                        err += (model.predict_row(val.x.row(i)) - y[i]).abs();
                        n += 1.0;
                    }
                }
                if n == 0.0 {
                    return Err(ModelError::usage("validation block has no observed targets"));
                }
                total += err / n;
            }
            Ok(total / train.horizons.len() as f64)
        };
        let r = search(&SearchSpace::default(), &mut objective, cfg.search_budget, cfg.seed)?;
        candidates.push(Candidate {
            id: "gbrt-searched".into(),
            spec: spec.clone(),
            learner: LearnerSpec::Gbrt(r.best.params.gbrt()),
        });
        Some(r)
    } else {
        None
    };

    // Backtest over the test block: the first origin is the first test
    // timestamp.
    let n = imputed[0].len();
    let test_start = split
        .test
        .times
        .first()
        .and_then(|t| imputed[0].index_of(*t))
        .ok_or_else(|| ModelError::usage("test block is empty"))?;
    let fold_len = (n - test_start) / cfg.folds.max(1);
    let bt = BacktestConfig {
        horizons: cfg.regime.horizons(),
        folds: cfg.folds,
        fold_len,
        stride: cfg.stride,
        refit: cfg.refit,
        min_train: spec.lags + 1,
    };
    let mut reports = Vec::with_capacity(candidates.len());
    for c in &candidates {
        reports.push(backtest(c, &kept, &[], &bt)?);
    }
    let champion = mark_champion(&mut reports, cfg.primary_horizon)?;
    let winner = candidates.iter().find(|c| c.id == champion).expect("champion is a candidate");
    let model = fit_global(&imputed, &[], &winner.spec, &winner.learner)?;
    Ok(PipelineOutcome {
        kept: kept.iter().map(|s| s.key.id()).collect(),
        dropped,
        split_rows,
        search: search_result,
        reports,
        champion,
        model,
        candidates,
    })
}
