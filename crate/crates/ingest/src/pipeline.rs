use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use twin_core::Catalog;
use twin_store::{compact, CompactionReport, HistoricalStore, ValidationRules, WindowStore, RETENTION};

use crate::adapter::{poll_and_normalize, Reject, SourceAdapter};
use crate::error::{IngestError, Result};
use crate::schedule::{run_schedule, Clock, JobKind, ScheduleEntry, TraceEntry};

/// Running counters. `polled == accepted + rejected` and `accepted` equals
/// the records appended to the window store.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestTotals {
    pub polled: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub failed_runs: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefreshReport {
    pub polled: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub pruned: usize,
}

/// Keeps at most this many reject records in memory.
const REJECT_LOG_CAP: usize = 10_000;

pub struct IngestPipeline {
    catalog: Catalog,
    window: WindowStore,
    history: HistoricalStore,
    rules: ValidationRules,
    adapters: BTreeMap<String, Box<dyn SourceAdapter>>,
    last_success: BTreeMap<String, DateTime<Utc>>,
    state_path: Option<PathBuf>,
    totals: IngestTotals,
    rejects: Vec<Reject>,
}

/// Monday 00:00 UTC at or before `t`.
pub fn week_start(t: DateTime<Utc>) -> DateTime<Utc> {
    let day = t.timestamp().div_euclid(86_400);
    // 1970-01-05 was a Monday.
    let monday = day - (day - 4).rem_euclid(7);
    Utc.timestamp_opt(monday * 86_400, 0).single().expect("in range")
}

impl IngestPipeline {
    pub fn new(catalog: Catalog, window: WindowStore, history: HistoricalStore, rules: ValidationRules) -> Self {
        IngestPipeline {
            catalog,
            window,
            history,
            rules,
            adapters: BTreeMap::new(),
            last_success: BTreeMap::new(),
            state_path: None,
            totals: IngestTotals::default(),
            rejects: Vec::new(),
        }
    }

    /// Persists per-source last-success instants in a JSON file so separate
    /// runs continue where the previous one stopped.
    pub fn with_state_file(mut self, path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        if path.exists() {
            let body = fs::read(&path).map_err(|e| IngestError::Config {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?;
            self.last_success = serde_json::from_slice(&body).map_err(|e| IngestError::Config {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?;
        }
        self.state_path = Some(path);
        Ok(self)
    }

    pub fn add_adapter(&mut self, adapter: Box<dyn SourceAdapter>) -> Result<()> {
        let id = adapter.source_id().to_string();
        if self.catalog.get(&id).is_none() {
            return Err(IngestError::Usage(format!("source {id} is not in the catalog")));
        }
        if self.adapters.insert(id.clone(), adapter).is_some() {
            return Err(IngestError::Usage(format!("source {id} has two adapters")));
        }
        Ok(())
    }

    pub fn window(&self) -> &WindowStore {
        &self.window
    }

    pub fn history(&self) -> &HistoricalStore {
        &self.history
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn totals(&self) -> IngestTotals {
        self.totals
    }

    pub fn rejects(&self) -> &[Reject] {
        &self.rejects
    }

    pub fn last_success(&self, source_id: &str) -> Option<DateTime<Utc>> {
        self.last_success.get(source_id).copied()
    }

    pub fn into_stores(self) -> (WindowStore, HistoricalStore) {
        (self.window, self.history)
    }

    /// One window refresh: poll since the last success (or the start of
    /// the retention window), append, prune. A transport failure leaves
    /// every store and counter untouched.
    pub fn refresh(&mut self, source_id: &str, now: DateTime<Utc>) -> Result<RefreshReport> {
        let adapter = self
            .adapters
            .get_mut(source_id)
            .ok_or_else(|| IngestError::Usage(format!("no adapter for source {source_id}")))?;
        let since = self
            .last_success
            .get(source_id)
            .copied()
            .unwrap_or(now - RETENTION.to_chrono());
        let normalized = poll_and_normalize(adapter.as_mut(), &self.catalog, since, now)?;
        let appended = self.window.append(&normalized.observations, now)?;
        let pruned = self.window.prune(now)?;

        let store_rejected = appended.rejected();
        let report = RefreshReport {
            polled: normalized.observations.len() + normalized.rejects.len(),
            accepted: appended.appended,
            rejected: normalized.rejects.len() + store_rejected,
            pruned,
        };
        self.totals.polled += report.polled;
        self.totals.accepted += report.accepted;
        self.totals.rejected += report.rejected;
        for r in normalized.rejects {
            if self.rejects.len() < REJECT_LOG_CAP {
                self.rejects.push(r);
            }
        }
        self.last_success.insert(source_id.to_string(), now);
        self.save_state()?;
        Ok(report)
    }

    /// Compacts the week that ended at the most recent Monday 00:00 UTC.
    pub fn compact_last_week(&mut self, now: DateTime<Utc>) -> Result<CompactionReport> {
        Ok(compact(&self.window, &mut self.history, &self.rules, week_start(now), now)?)
    }

    /// Compacts the week `[week_ending - 7d, week_ending)`.
    pub fn compact_week(&mut self, week_ending: DateTime<Utc>, now: DateTime<Utc>) -> Result<CompactionReport> {
        Ok(compact(&self.window, &mut self.history, &self.rules, week_ending, now)?)
    }

    /// Drives refreshes and compactions from schedule entries.
    pub fn run(&mut self, entries: &[ScheduleEntry], clock: &mut dyn Clock, until: DateTime<Utc>) -> Result<Vec<TraceEntry>> {
        let trace = run_schedule(entries, clock, until, |e, at| match e.kind {
            JobKind::WindowRefresh => self
                .refresh(&e.source_id, at)
                .map(|r| format!("polled {} accepted {} rejected {}", r.polled, r.accepted, r.rejected))
                .map_err(|err| err.to_string()),
            JobKind::WeeklyCompaction => self
                .compact_last_week(at)
                .map(|r| format!("week {} moved {} rejected {}", r.week, r.moved, r.rejected))
                .map_err(|err| err.to_string()),
        })?;
        self.totals.failed_runs += trace.iter().filter(|e| !e.ok).count();
        Ok(trace)
    }

    fn save_state(&self) -> Result<()> {
        let Some(path) = &self.state_path else {
            return Ok(());
        };
        let tmp = path.with_extension("json.tmp");
        let body = serde_json::to_vec_pretty(&self.last_success).expect("instants serialize");
        fs::write(&tmp, body)
            .and_then(|_| fs::rename(&tmp, path))
            .map_err(|e| IngestError::Config {
                path: path.display().to_string(),
                detail: e.to_string(),
            })
    }
}

impl std::fmt::Debug for IngestPipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IngestPipeline")
            .field("sources", &self.adapters.keys().collect::<Vec<_>>())
            .field("totals", &self.totals)
            .finish()
    }
}

