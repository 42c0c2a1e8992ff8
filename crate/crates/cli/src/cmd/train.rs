use std::fs;

use chrono::{DateTime, Utc};
use serde_json::{json, Value};
use twin_api::{HorizonScore, ModelEntry, Registry};
use twin_core::SeriesKey;
use twin_models::learners::{deep_slow, save_forecaster, shallow_fast, Candidate, LearnerSpec};
use twin_models::pipeline::{run_pipeline, PipelineConfig, PipelineOutcome, Regime};
use twin_models::runoff::{fit_runoff, gradient_check, save_runoff, LstmNetwork, RunoffDataset, Scalers, TrainConfig};

use crate::data::Stores;
use crate::error::{CliError, CliResult};
use crate::Ctx;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelKind {
    Gbrt,
    Linear,
    Lstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum RegimeArg {
    Hourly,
    Weekly,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Hourly => Regime::Hourly,
            RegimeArg::Weekly => Regime::Weekly,
        }
    }
}

/// Options shared by `train` and `backtest` for pooled models.
#[derive(Debug, Clone)]
pub struct PoolOptions {
    pub model: Option<ModelKind>,
    pub regime: Regime,
    pub search_budget: usize,
    pub seed: u64,
    pub stride: usize,
}

pub struct TrainArgs {
    pub target: String,
    pub pool: PoolOptions,
    pub horizons: Vec<usize>,
    pub hidden: usize,
    pub epochs: usize,
    pub window: usize,
    pub now: Option<DateTime<Utc>>,
}

/// Gradient-check threshold for the LSTM preflight.
const PREFLIGHT_TOL: f64 = 1e-4;

fn candidates(opts: &PoolOptions) -> CliResult<Option<Vec<Candidate>>> {
    let spec = opts.regime.lag_spec();
    let c = |id: &str, learner| Candidate {
        id: id.into(),
        spec: spec.clone(),
        learner,
    };
    Ok(match opts.model {
        None => None,
        Some(ModelKind::Gbrt) => Some(vec![
            c("gbrt-deep-slow", LearnerSpec::Gbrt(deep_slow())),
            c("gbrt-shallow-fast", LearnerSpec::Gbrt(shallow_fast())),
            c("naive", LearnerSpec::Persistence),
        ]),
        Some(ModelKind::Linear) => {
            if opts.search_budget > 0 {
                return Err(CliError::usage("--search-budget applies to gbrt models only"));
            }
            Some(vec![c("linear", LearnerSpec::Linear), c("naive", LearnerSpec::Persistence)])
        }
        Some(ModelKind::Lstm) => return Err(CliError::usage("lstm models are not pooled")),
    })
}

/// Runs the full candidate pipeline over every series sharing the
/// target's source and variable.
pub fn run_pool(stores: &Stores, key: &SeriesKey, opts: &PoolOptions) -> CliResult<(Vec<SeriesKey>, PipelineOutcome)> {
    let peers = stores.peers(key);
    let series = stores.aligned(&peers, opts.regime.step())?;
    let mut cfg = PipelineConfig::new(opts.regime);
    cfg.search_budget = opts.search_budget;
    cfg.seed = opts.seed;
    cfg.stride = opts.stride.max(1);
    cfg.candidates = candidates(opts)?;
    let outcome = run_pipeline(series, &cfg)?;
    Ok((peers, outcome))
}

pub fn regime_label(r: Regime) -> &'static str {
    match r {
        Regime::Hourly => "hourly",
        Regime::Weekly => "weekly",
    }
}

pub fn outcome_json(key: &SeriesKey, regime: Regime, o: &PipelineOutcome) -> Value {
    json!({
        "source": key.source_id,
        "variable": key.variable,
        "regime": regime_label(regime),
        "series": o.kept,
        "dropped": o.dropped.iter().map(|d| json!({"series": d.series.id(), "missing_fraction": d.missing_fraction})).collect::<Vec<_>>(),
        "split_rows": o.split_rows,
        "champion": o.champion,
        "candidates": o.reports.iter().map(|r| json!({
            "candidate": r.candidate,
            "champion": r.champion,
            "horizons": r.horizons.iter().map(|h| json!({
                "horizon": h.horizon,
                "mae": h.metrics.mae,
                "cvrmse": h.metrics.cvrmse,
                "n": h.metrics.n,
            })).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "search": o.search,
    })
}

pub fn run(ctx: &Ctx, args: TrainArgs) -> CliResult<()> {
    let stores = Stores::open(&ctx.root)?;
    let key = stores.resolve_target(&args.target)?;
    if args.pool.model == Some(ModelKind::Lstm) {
        return train_lstm(ctx, &stores, &key, &args);
    }
    let (_, outcome) = run_pool(&stores, &key, &args.pool)?;
    let regime = args.pool.regime;
    let id = format!("{}-{}-{}", regime_label(regime), key.source_id, key.variable);
    let file = format!("{id}.lgbt");
    save_forecaster(&ctx.root.models().join(&file), &outcome.model)?;
    let champion = outcome
        .reports
        .iter()
        .find(|r| r.champion)
        .expect("pipeline marks a champion");
    let mut registry = Registry::load(&ctx.root.registry())?;
    registry.upsert(ModelEntry::Global {
        id: id.clone(),
        file,
        candidate: outcome.champion.clone(),
        step: regime.step(),
        horizons: regime.horizons(),
        metrics: champion
            .horizons
            .iter()
            .map(|h| HorizonScore {
                horizon: h.horizon,
                metrics: h.metrics,
            })
            .collect(),
        trained_at: args.now.unwrap_or_else(Utc::now),
    });
    registry.save(&ctx.root.registry())?;
    let report = outcome_json(&key, regime, &outcome);
    write_report(ctx, &id, &report)?;

    if ctx.json {
        println!("{}", json!({ "model_id": id, "report": report }));
    } else {
        println!("model {id} covers {} series; champion {}", outcome.kept.len(), outcome.champion);
        crate::cmd::backtest::print_table(&[report]);
    }
    Ok(())
}

fn write_report(ctx: &Ctx, id: &str, report: &Value) -> CliResult<()> {
    let dir = ctx.root.reports();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(format!("{id}.json")), serde_json::to_vec_pretty(report).expect("report serializes"))?;
    Ok(())
}

/// Largest relative gradient error of an 8-unit network over five windows
/// spread across the training samples.
pub fn preflight(ds: &RunoffDataset<f64>, seed: u64) -> CliResult<f64> {
    let split = ds.split()?;
    let scalers = Scalers::fit(ds, &split.train)?;
    let net = LstmNetwork::<f64>::seeded(ds.width(), 8, seed)?;
    let n = split.train.len();
    let mut worst: f64 = 0.0;
    for k in 0..5 {
        let e = split.train[k * (n - 1) / 4];
        let seq = scalers.scale_window(&ds.window_rows(e));
        let target = scalers.target.apply_value(0, ds.target_for(e));
        worst = worst.max(gradient_check(&net, &seq, target, 1e-5)?);
    }
    Ok(worst)
}

fn train_lstm(ctx: &Ctx, stores: &Stores, key: &SeriesKey, args: &TrainArgs) -> CliResult<()> {
    if args.horizons.is_empty() {
        return Err(CliError::usage("--horizons needs at least one value"));
    }
    let cfg = TrainConfig {
        hidden: args.hidden,
        epochs: args.epochs,
        seed: args.pool.seed,
        ..TrainConfig::paper()
    };
    let mut registry = Registry::load(&ctx.root.registry())?;
    let mut summaries = Vec::new();
    let mut grad_err = None;
    for &h in &args.horizons {
        let ds = stores.runoff_dataset(key, h, args.window)?;
        if grad_err.is_none() {
            let err = preflight(&ds, args.pool.seed)?;
            if !ctx.json {
                println!("gradient check: max relative error {err:.3e} over 5 windows");
            }
            if !(err < PREFLIGHT_TOL) {
                return Err(CliError::failed(format!(
                    "gradient check failed: relative error {err:.3e} exceeds {PREFLIGHT_TOL:e}"
                )));
            }
            grad_err = Some(err);
        }
        let (model, report) = fit_runoff(&ds, &cfg)?;
        let id = format!("runoff-{}-h{h}", key.station_id);
        let file = format!("{id}.lgls");
        save_runoff(&ctx.root.models().join(&file), &model)?;
        registry.upsert(ModelEntry::Runoff {
            id: id.clone(),
            file,
            station: key.station_id.clone(),
            horizon: h,
            metrics: Some(report.test),
            trained_at: args.now.unwrap_or_else(Utc::now),
        });
        let summary = json!({
            "model_id": id,
            "horizon": h,
            "inputs": ds.width(),
            "best_epoch": report.best_epoch,
            "val_mae": report.val_mae,
            "persistence_val_mae": report.persistence_val_mae,
            "test": report.test,
            "persistence_test_mae": report.persistence_test_mae,
            "model_version": model.meta.model_version,
        });
        write_report(ctx, &id, &json!({ "summary": summary, "report": report }))?;
        if !ctx.json {
            println!(
                "{id}: {} inputs, best epoch {:?}, val MAE {:.4} (persistence {:.4}), test MAE {:.4}",
                ds.width(),
                report.best_epoch,
                report.val_mae,
                report.persistence_val_mae,
                report.test.mae
            );
        }
        summaries.push(summary);
    }
    registry.save(&ctx.root.registry())?;
    if ctx.json {
        println!("{}", json!({ "gradient_check": grad_err, "models": summaries }));
    }
    Ok(())
}
