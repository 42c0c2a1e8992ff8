use std::collections::BTreeSet;

use serde_json::{json, Value};

use crate::cmd::train::{outcome_json, run_pool, PoolOptions};
use crate::data::Stores;
use crate::error::CliResult;
use crate::Ctx;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Table,
    Json,
}

/// Backtests every candidate for each target, or for every stored
/// (source, variable) pair when no target is given. Writes nothing.
pub fn run(ctx: &Ctx, targets: &[String], opts: &PoolOptions, format: ReportFormat) -> CliResult<()> {
    let stores = Stores::open(&ctx.root)?;
    let keys = if targets.is_empty() {
        let mut seen = BTreeSet::new();
        stores
            .series_with_data()
            .into_values()
            .filter(|k| seen.insert((k.source_id.clone(), k.variable.clone())))
            .collect()
    } else {
        targets.iter().map(|t| stores.resolve_target(t)).collect::<CliResult<Vec<_>>>()?
    };
    let mut outcomes = Vec::new();
    for key in &keys {
        let (_, outcome) = run_pool(&stores, key, opts)?;
        outcomes.push(outcome_json(key, opts.regime, &outcome));
    }
    if ctx.json || format == ReportFormat::Json {
        println!("{}", serde_json::to_string_pretty(&json_rows(&outcomes)).expect("report serializes"));
    } else {
        print_table(&outcomes);
    }
    Ok(())
}

/// `{"rows": [...], "champions": {"source/variable": id}}`, one row per
/// variable, horizon and candidate.
pub fn json_rows(outcomes: &[Value]) -> Value {
    let mut rows = Vec::new();
    let mut champions = serde_json::Map::new();
    for o in outcomes {
        let name = format!("{}/{}", o["source"].as_str().unwrap_or(""), o["variable"].as_str().unwrap_or(""));
        champions.insert(name, o["champion"].clone());
        for c in o["candidates"].as_array().into_iter().flatten() {
            for h in c["horizons"].as_array().into_iter().flatten() {
                rows.push(json!({
                    "source": o["source"],
                    "variable": o["variable"],
                    "regime": o["regime"],
                    "horizon": h["horizon"],
                    "candidate": c["candidate"],
                    "mae": h["mae"],
                    "cvrmse": h["cvrmse"],
                    "n": h["n"],
                    "champion": c["champion"],
                }));
            }
        }
    }
    json!({ "rows": rows, "champions": champions })
}

pub fn print_table(outcomes: &[Value]) {
    let rows = json_rows(outcomes);
    println!("{:<14} {:>7} {:<20} {:>10} {:>10}", "variable", "horizon", "candidate", "MAE", "CVRMSE");
    for r in rows["rows"].as_array().into_iter().flatten() {
        let cv = r["cvrmse"].as_f64().map_or("-".to_string(), |v| format!("{v:.2}"));
        let mark = if r["champion"] == true { " *" } else { "" };
        println!(
            "{:<14} {:>7} {:<20} {:>10.4} {:>10}{mark}",
            r["variable"].as_str().unwrap_or(""),
            r["horizon"].as_u64().unwrap_or(0),
            r["candidate"].as_str().unwrap_or(""),
            r["mae"].as_f64().unwrap_or(f64::NAN),
            cv
        );
    }
}
