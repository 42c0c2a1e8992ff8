use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use serde_json::json;
use twin_context::{wrap_observations, ContextStore};
use twin_core::time::{floor_to, parse_rfc3339, Span};
use twin_core::Catalog;
use twin_ingest::config::{build_adapter, load_schedule, load_sources};
use twin_ingest::{IngestPipeline, JobKind, ScheduleEntry, SystemClock, TraceEntry, VirtualClock};
use twin_store::{HistoricalStore, ValidationRules, WindowStore};

use crate::error::{CliError, CliResult};
use crate::Ctx;

pub struct IngestArgs {
    pub config: PathBuf,
    pub schedule: Option<PathBuf>,
    pub follow: bool,
    pub virtual_clock: Option<String>,
    pub now: Option<DateTime<Utc>>,
}

/// Hourly refresh and a Monday-midnight compaction per source.
fn default_schedule(sources: &[String]) -> Vec<ScheduleEntry> {
    sources
        .iter()
        .flat_map(|s| {
            [
                ScheduleEntry::new(s, "0 0 * * * *", JobKind::WindowRefresh),
                ScheduleEntry::new(s, "0 0 0 * * Mon", JobKind::WeeklyCompaction),
            ]
        })
        .collect()
}

/// `<span>` or `<rfc3339 start>+<span>`.
fn parse_virtual_clock(s: &str, default_start: DateTime<Utc>) -> CliResult<(DateTime<Utc>, Span)> {
    let bad = |detail: String| CliError::usage(format!("--virtual-clock '{s}': {detail}"));
    let (start, span) = match s.rsplit_once('+') {
        Some((start, span)) if start.contains('T') => (parse_rfc3339(start).map_err(|e| bad(e.to_string()))?, span),
        _ => (default_start, s),
    };
    let span: Span = span.parse().map_err(|e: twin_core::CoreError| bad(e.to_string()))?;
    if span.as_secs() <= 0 {
        return Err(bad("span must be positive".into()));
    }
    Ok((start, span))
}

fn latest_per_series(window: &WindowStore) -> CliResult<BTreeMap<String, DateTime<Utc>>> {
    let mut out = BTreeMap::new();
    for key in window.series() {
        if let Some(o) = window.read(key, DateTime::<Utc>::MIN_UTC, DateTime::<Utc>::MAX_UTC)?.last() {
            out.insert(key.id(), o.timestamp);
        }
    }
    Ok(out)
}

/// Records every newly stored observation as a temporal point on its
/// station's Device entity.
fn wrap_new(ctx: &Ctx, catalog: &Catalog, window: &WindowStore, before: &BTreeMap<String, DateTime<Utc>>) -> CliResult<usize> {
    let mut store = ContextStore::open(ctx.root.context())?;
    let mut points = 0;
    for key in window.series() {
        let Some(station) = catalog.get(&key.source_id).and_then(|d| d.station(&key.station_id)) else {
            continue;
        };
        let from = before
            .get(&key.id())
            .map(|t| *t + Duration::seconds(1))
            .unwrap_or(DateTime::<Utc>::MIN_UTC);
        let batch = window.read(key, from, DateTime::<Utc>::MAX_UTC)?;
        if !batch.is_empty() {
            points += wrap_observations(&mut store, key, station, &batch)?;
        }
    }
    Ok(points)
}

pub fn run(ctx: &Ctx, args: IngestArgs) -> CliResult<()> {
    let sources = load_sources(&args.config)?;
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut catalog = Catalog::load_dir(&ctx.root.catalog())?;
    for s in &sources {
        if catalog.get(&s.source_id).is_none() {
            let d = s
                .catalog_entry()
                .or_else(|| Catalog::lagoon().get(&s.source_id).cloned())
                .ok_or_else(|| {
                    CliError::usage(format!(
                        "source {} is not in the catalog and its config has no descriptor",
                        s.source_id
                    ))
                })?;
            catalog.register(d)?;
        }
    }
    catalog.save_dir(&ctx.root.catalog())?;
    let entries = match &args.schedule {
        Some(p) => load_schedule(p)?,
        None => default_schedule(&sources.iter().map(|s| s.source_id.clone()).collect::<Vec<_>>()),
    };

    let window = WindowStore::open(ctx.root.window())?;
    let before = latest_per_series(&window)?;
    let history = HistoricalStore::open(ctx.root.history())?;
    let mut pipeline = IngestPipeline::new(catalog.clone(), window, history, ValidationRules::lagoon_defaults())
        .with_state_file(ctx.root.ingest_state())?;
    for s in &sources {
        pipeline.add_adapter(build_adapter(s, &base)?)?;
    }

    let now = args.now.unwrap_or_else(Utc::now);
    let trace: Vec<TraceEntry> = if let Some(vc) = &args.virtual_clock {
        let (start, span) = parse_virtual_clock(vc, floor_to(now, Span::hours(1)))?;
        let mut clock = VirtualClock::new(start);
        pipeline.run(&entries, &mut clock, start + span.to_chrono())?
    } else if args.follow {
        let mut clock = SystemClock;
        loop {
            let until = Utc::now() + Duration::hours(1);
            for e in pipeline.run(&entries, &mut clock, until)? {
                print_trace(ctx, &e);
            }
        }
    } else {
        once(&mut pipeline, &entries, now)
    };

    let totals = pipeline.totals();
    let (window, _) = pipeline.into_stores();
    let points = wrap_new(ctx, &catalog, &window, &before)?;
    if ctx.json {
        println!("{}", json!({ "trace": trace, "totals": totals, "context_points": points }));
    } else {
        for e in &trace {
            print_trace(ctx, e);
        }
        println!(
            "polled {} accepted {} rejected {} failed runs {}",
            totals.polled, totals.accepted, totals.rejected, totals.failed_runs
        );
    }
    let failed = trace.iter().filter(|e| !e.ok).count();
    if failed > 0 {
        return Err(CliError::failed(format!("{failed} scheduled runs failed")));
    }
    Ok(())
}

fn once(pipeline: &mut IngestPipeline, entries: &[ScheduleEntry], now: DateTime<Utc>) -> Vec<TraceEntry> {
    let mut sorted: Vec<&ScheduleEntry> = entries.iter().collect();
    sorted.sort_by(|a, b| (a.kind, &a.source_id).cmp(&(b.kind, &b.source_id)));
    sorted
        .into_iter()
        .map(|e| {
            let out = match e.kind {
                JobKind::WindowRefresh => pipeline
                    .refresh(&e.source_id, now)
                    .map(|r| format!("polled {} accepted {} rejected {}", r.polled, r.accepted, r.rejected)),
                JobKind::WeeklyCompaction => pipeline
                    .compact_last_week(now)
                    .map(|r| format!("week {} moved {} rejected {}", r.week, r.moved, r.rejected)),
            };
            let (ok, detail) = match out {
                Ok(d) => (true, d),
                Err(e) => (false, e.to_string()),
            };
            TraceEntry {
                instant: now,
                source_id: e.source_id.clone(),
                kind: e.kind,
                ok,
                detail,
            }
        })
        .collect()
}

fn print_trace(ctx: &Ctx, e: &TraceEntry) {
    if ctx.json {
        println!("{}", serde_json::to_string(e).expect("trace serializes"));
    } else {
        let kind = match e.kind {
            JobKind::WindowRefresh => "refresh",
            JobKind::WeeklyCompaction => "compact",
        };
        let status = if e.ok { "ok" } else { "FAILED" };
        println!("{} {} {kind} {status} {}", twin_core::time::rfc3339(e.instant), e.source_id, e.detail);
    }
}
