use chrono::{DateTime, Duration, NaiveDate, Utc, Weekday};
use serde_json::json;
use twin_store::{compact, HistoricalStore, ValidationRules, WindowStore};

use crate::error::{CliError, CliResult};
use crate::Ctx;

/// Monday 00:00 UTC that ends ISO week `YYYY-Www`.
pub fn week_ending(iso: &str) -> CliResult<DateTime<Utc>> {
    let bad = || CliError::usage(format!("--week must look like 2024-W23, got '{iso}'"));
    let (y, w) = iso.split_once("-W").ok_or_else(bad)?;
    let year: i32 = y.parse().map_err(|_| bad())?;
    let week: u32 = w.parse().map_err(|_| bad())?;
    let monday = NaiveDate::from_isoywd_opt(year, week, Weekday::Mon).ok_or_else(bad)?;
    Ok(monday.and_hms_opt(0, 0, 0).expect("midnight").and_utc() + Duration::days(7))
}

pub fn run(ctx: &crate::Ctx, week: &str, now: Option<DateTime<Utc>>) -> CliResult<()> {
    let ending = week_ending(week)?;
    let now = now.unwrap_or_else(Utc::now);
    let window = WindowStore::open(ctx.root.window())?;
    let mut hist = HistoricalStore::open(ctx.root.history())?;
    let report = compact(&window, &mut hist, &ValidationRules::lagoon_defaults(), ending, now)?;
    print(ctx, &report);
    Ok(())
}

fn print(ctx: &Ctx, r: &twin_store::CompactionReport) {
    if ctx.json {
        println!("{}", json!(r));
        return;
    }
    println!(
        "week {}: moved {} rejected {} segments {} already compacted {}",
        r.week, r.moved, r.rejected, r.segments_written, r.already_compacted
    );
    for rej in &r.rejections {
        println!("  rejected {} {} {} ({:?})", rej.series, twin_core::time::rfc3339(rej.timestamp), rej.value, rej.reason);
    }
}
