use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use twin_core::time::rfc3339;
use twin_core::SeriesKey;

use crate::error::{Result, StoreError};
use crate::historical::{HistoricalStore, PendingSegment};
use crate::validation::{RejectReason, ValidationRules};
use crate::window::WindowStore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub series: String,
    pub timestamp: DateTime<Utc>,
    pub value: f64,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompactionReport {
    pub week: String,
    pub moved: usize,
    pub rejected: usize,
    pub segments_written: usize,
    /// Series whose week was already compacted and were skipped.
    pub already_compacted: usize,
    pub rejections: Vec<Rejection>,
}

/// Moves the week `[week_ending - 7d, week_ending)` from the window into
/// history. Each record either lands in exactly one new segment or is
/// reported as rejected. Re-running a week is a no-op.
pub fn compact(
    window: &WindowStore,
    hist: &mut HistoricalStore,
    rules: &ValidationRules,
    week_ending: DateTime<Utc>,
    now: DateTime<Utc>,
) -> Result<CompactionReport> {
    if week_ending > now {
        return Err(StoreError::Usage(format!(
            "week ending {week_ending} is in the future (now {now})"
        )));
    }
    let week = rfc3339(week_ending);
    let start = week_ending - Duration::days(7);
    let mut report = CompactionReport {
        week: week.clone(),
        ..Default::default()
    };
    let mut pending = Vec::new();
    let keys: Vec<SeriesKey> = window.series().cloned().collect();
    for key in keys {
        if hist.is_compacted(&key, &week) {
            report.already_compacted += 1;
            continue;
        }
        let mut records = window.read(&key, start, week_ending)?;
        records.retain(|o| o.timestamp < week_ending);
        let verdicts = rules.check_series(&records);
        let mut accepted = Vec::with_capacity(records.len());
        for (obs, verdict) in records.into_iter().zip(verdicts) {
            match verdict {
                None => accepted.push(obs),
                Some(reason) => report.rejections.push(Rejection {
                    series: key.id(),
                    timestamp: obs.timestamp,
                    value: obs.value,
                    reason,
                }),
            }
        }
        report.moved += accepted.len();
        if !accepted.is_empty() {
            report.segments_written += 1;
        }
        pending.push(PendingSegment {
            series: key,
            week: week.clone(),
            records: accepted,
        });
    }
    report.rejected = report.rejections.len();
    hist.write_batch(pending)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageReport {
    pub window_bytes: u64,
    pub hist_bytes: u64,
    pub records: u64,
}

pub fn storage_report(window: &WindowStore, hist: &HistoricalStore) -> Result<StorageReport> {
    Ok(StorageReport {
        window_bytes: window.bytes()?,
        hist_bytes: hist.bytes(),
        records: window.record_count() as u64 + hist.record_count(),
    })
}
