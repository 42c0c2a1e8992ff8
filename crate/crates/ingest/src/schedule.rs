//! In-process stand-in for a cron daemon.
//!
//! Cadences are six-field cron expressions with a leading seconds field
//! (`0 0 * * * *` is hourly on the hour), evaluated in UTC.

use std::collections::BTreeSet;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{IngestError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    WindowRefresh,
    WeeklyCompaction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub source_id: String,
    pub cadence: String,
    pub kind: JobKind,
}

impl ScheduleEntry {
    pub fn new(source_id: &str, cadence: &str, kind: JobKind) -> Self {
        ScheduleEntry {
            source_id: source_id.into(),
            cadence: cadence.into(),
            kind,
        }
    }

    pub fn schedule(&self) -> Result<cron::Schedule> {
        cron::Schedule::from_str(&self.cadence).map_err(|e| {
            IngestError::Usage(format!("cadence '{}' for {}: {e}", self.cadence, self.source_id))
        })
    }
}

/// Every cadence parses and no source has more than one weekly compaction
/// entry. With `require_compaction`, every source must have exactly one.
pub fn validate_entries(entries: &[ScheduleEntry], require_compaction: bool) -> Result<()> {
    let mut compaction = BTreeSet::new();
    for e in entries {
        e.schedule()?;
        if e.kind == JobKind::WeeklyCompaction && !compaction.insert(e.source_id.as_str()) {
            return Err(IngestError::Usage(format!(
                "source {} has more than one weekly_compaction entry",
                e.source_id
            )));
        }
    }
    if require_compaction {
        if let Some(e) = entries.iter().find(|e| !compaction.contains(e.source_id.as_str())) {
            return Err(IngestError::Usage(format!(
                "source {} has no weekly_compaction entry",
                e.source_id
            )));
        }
    }
    Ok(())
}

pub trait Clock {
    fn now(&self) -> DateTime<Utc>;
    /// Blocks (or jumps) until `t`. Never moves time backwards.
    fn wait_until(&mut self, t: DateTime<Utc>);
}

#[derive(Debug, Clone, Copy)]
pub struct VirtualClock {
    now: DateTime<Utc>,
}

impl VirtualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        VirtualClock { now: start }
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> DateTime<Utc> {
        self.now
    }

    fn wait_until(&mut self, t: DateTime<Utc>) {
        self.now = self.now.max(t);
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }

    fn wait_until(&mut self, t: DateTime<Utc>) {
        if let Ok(d) = (t - Utc::now()).to_std() {
            std::thread::sleep(d);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub instant: DateTime<Utc>,
    pub source_id: String,
    pub kind: JobKind,
    pub ok: bool,
    pub detail: String,
}

/// Runs every entry once per due instant in `(clock.now(), until]`.
/// Simultaneous runs are ordered by source id, then refresh before
/// compaction. A failing job becomes a trace entry and does not affect
/// other entries.
pub fn run_schedule<F>(
    entries: &[ScheduleEntry],
    clock: &mut dyn Clock,
    until: DateTime<Utc>,
    mut job: F,
) -> Result<Vec<TraceEntry>>
where
    F: FnMut(&ScheduleEntry, DateTime<Utc>) -> std::result::Result<String, String>,
{
    validate_entries(entries, false)?;
    let start = clock.now();
    let mut due = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        for t in e.schedule()?.after(&start).take_while(|t| *t <= until) {
            due.push((t, e.source_id.as_str(), e.kind, i));
        }
    }
    due.sort();
    let mut trace = Vec::with_capacity(due.len());
    for (t, _, _, i) in due {
        clock.wait_until(t);
        let e = &entries[i];
        let (ok, detail) = match job(e, t) {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        if !ok {
            tracing::warn!(source = %e.source_id, at = %t, "scheduled run failed: {detail}");
        }
        trace.push(TraceEntry {
            instant: t,
            source_id: e.source_id.clone(),
            kind: e.kind,
            ok,
            detail,
        });
    }
    clock.wait_until(until);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use twin_core::time::parse_rfc3339;

    fn t(s: &str) -> DateTime<Utc> {
        parse_rfc3339(s).unwrap()
    }

    const HOURLY: &str = "0 0 * * * *";

    #[test]
    fn hourly_over_three_hours() {
        let mut clock = VirtualClock::new(t("2024-06-02T00:00:00Z"));
        let entries = [ScheduleEntry::new("aemet", HOURLY, JobKind::WindowRefresh)];
        let trace = run_schedule(&entries, &mut clock, t("2024-06-02T03:00:00Z"), |_, _| Ok(String::new())).unwrap();
        assert_eq!(trace.len(), 3);
        assert_eq!(trace[0].instant, t("2024-06-02T01:00:00Z"));
        assert_eq!(trace[2].instant, t("2024-06-02T03:00:00Z"));
        assert_eq!(clock.now(), t("2024-06-02T03:00:00Z"));
    }

    #[test]
    fn ties_break_by_source_id() {
        let mut clock = VirtualClock::new(t("2024-06-02T00:00:00Z"));
        let entries = [
            ScheduleEntry::new("sinqlair", HOURLY, JobKind::WindowRefresh),
            ScheduleEntry::new("aemet", HOURLY, JobKind::WindowRefresh),
        ];
        let trace = run_schedule(&entries, &mut clock, t("2024-06-02T01:00:00Z"), |_, _| Ok(String::new())).unwrap();
        let order: Vec<_> = trace.iter().map(|e| e.source_id.as_str()).collect();
        assert_eq!(order, vec!["aemet", "sinqlair"]);
    }

    #[test]
    fn failure_does_not_block_others() {
        let mut clock = VirtualClock::new(t("2024-06-02T00:00:00Z"));
        let entries = [
            ScheduleEntry::new("a", HOURLY, JobKind::WindowRefresh),
            ScheduleEntry::new("b", HOURLY, JobKind::WindowRefresh),
        ];
        let trace = run_schedule(&entries, &mut clock, t("2024-06-02T02:00:00Z"), |e, _| {
            if e.source_id == "a" {
                Err("down".into())
            } else {
                Ok("fine".into())
            }
        })
        .unwrap();
        assert_eq!(trace.iter().filter(|e| e.ok).count(), 2);
        assert_eq!(trace.iter().filter(|e| !e.ok).count(), 2);
    }

    #[test]
    fn weekly_compaction_fires_on_mondays() {
        let mut clock = VirtualClock::new(t("2024-06-01T00:00:00Z"));
        let entries = [ScheduleEntry::new("a", "0 0 0 * * Mon", JobKind::WeeklyCompaction)];
        let trace = run_schedule(&entries, &mut clock, t("2024-06-30T00:00:00Z"), |_, _| Ok(String::new())).unwrap();
        let days: Vec<_> = trace.iter().map(|e| e.instant).collect();
        assert_eq!(
            days,
            vec![
                t("2024-06-03T00:00:00Z"),
                t("2024-06-10T00:00:00Z"),
                t("2024-06-17T00:00:00Z"),
                t("2024-06-24T00:00:00Z")
            ]
        );
    }

    #[test]
    fn identical_runs_give_identical_traces() {
        let entries = [
            ScheduleEntry::new("b", "0 */20 * * * *", JobKind::WindowRefresh),
            ScheduleEntry::new("a", HOURLY, JobKind::WindowRefresh),
        ];
        let run = || {
            let mut clock = VirtualClock::new(t("2024-06-02T00:00:00Z"));
            let mut n = 0;
            run_schedule(&entries, &mut clock, t("2024-06-02T05:00:00Z"), |e, at| {
                n += 1;
                if n % 3 == 0 {
                    Err(format!("{} {at}", e.source_id))
                } else {
                    Ok(n.to_string())
                }
            })
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn entry_validation() {
        assert!(validate_entries(&[ScheduleEntry::new("a", "every hour", JobKind::WindowRefresh)], false).is_err());
        let two = [
            ScheduleEntry::new("a", "0 0 0 * * Mon", JobKind::WeeklyCompaction),
            ScheduleEntry::new("a", "0 0 0 * * Sun", JobKind::WeeklyCompaction),
        ];
        assert!(validate_entries(&two, false).is_err());
        let only_refresh = [ScheduleEntry::new("a", HOURLY, JobKind::WindowRefresh)];
        assert!(validate_entries(&only_refresh, false).is_ok());
        assert!(validate_entries(&only_refresh, true).is_err());
    }
}
