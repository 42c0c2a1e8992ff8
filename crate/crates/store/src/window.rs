//! Seven-day append log.
//!
//! One text file per series at `<root>/<source>/<station>/<variable>.log`,
//! one record per line:
//!
//! ```text
//! <RFC3339 timestamp>\t<value>\t<quality>\n
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! parsing a line gives back the exact `f64`. Units live in
//! `<root>/series.json`, which maps each series id to its full key.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use twin_core::time::{parse_rfc3339, rfc3339, Span};
use twin_core::{Observation, Quality, SeriesKey};

use crate::error::{Result, StoreError};

/// The window keeps records with `timestamp >= now - RETENTION`.
pub const RETENTION: Span = Span::days(7);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppendReport {
    pub appended: usize,
    /// Older than the retention window at append time.
    pub rejected_stale: usize,
    /// Same series and timestamp as a record already in the window.
    pub duplicates: usize,
}

impl AppendReport {
    pub fn rejected(&self) -> usize {
        self.rejected_stale + self.duplicates
    }
}

#[derive(Debug)]
pub struct WindowStore {
    root: PathBuf,
    series: BTreeMap<String, SeriesKey>,
    /// Timestamps present per series id; used for duplicate detection so
    /// appends never re-read the log files.
    present: BTreeMap<String, BTreeSet<i64>>,
    rejected_total: usize,
}

impl WindowStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| StoreError::io(&root, e))?;
        let index = root.join("series.json");
        let series: BTreeMap<String, SeriesKey> = if index.exists() {
            let body = fs::read(&index).map_err(|e| StoreError::io(&index, e))?;
            serde_json::from_slice(&body)
                .map_err(|e| StoreError::format("window series index", e.to_string()))?
        } else {
            BTreeMap::new()
        };
        let mut store = WindowStore {
            root,
            series,
            present: BTreeMap::new(),
            rejected_total: 0,
        };
        let keys: Vec<SeriesKey> = store.series.values().cloned().collect();
        for key in keys {
            let ts = store
                .read_all(&key)?
                .iter()
                .map(|o| o.timestamp.timestamp())
                .collect();
            store.present.insert(key.id(), ts);
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn log_path(&self, key: &SeriesKey) -> PathBuf {
        self.root
            .join(&key.source_id)
            .join(&key.station_id)
            .join(format!("{}.log", key.variable))
    }

    pub fn series(&self) -> impl Iterator<Item = &SeriesKey> {
        self.series.values()
    }

    /// Total records refused by `append` since this handle was opened.
    pub fn rejected_total(&self) -> usize {
        self.rejected_total
    }

    fn register(&mut self, key: &SeriesKey) -> Result<()> {
        match self.series.get(&key.id()) {
            Some(existing) if existing.unit != key.unit => Err(StoreError::Conflict(format!(
                "series {} already stored in unit {}, got {}",
                key.id(),
                existing.unit,
                key.unit
            ))),
            Some(_) => Ok(()),
            None => {
                self.series.insert(key.id(), key.clone());
                let index = self.root.join("series.json");
                let tmp = self.root.join("series.json.tmp");
                let body = serde_json::to_vec_pretty(&self.series).expect("keys serialize");
                fs::write(&tmp, body).map_err(|e| StoreError::io(&tmp, e))?;
                fs::rename(&tmp, &index).map_err(|e| StoreError::io(&index, e))?;
                Ok(())
            }
        }
    }

    /// Appends a batch. Records older than the retention window and
    /// duplicates of stored timestamps are skipped and counted; existing
    /// log contents are never read.
    pub fn append(&mut self, batch: &[Observation], now: DateTime<Utc>) -> Result<AppendReport> {
        let mut report = AppendReport::default();
        let cutoff = now - RETENTION.to_chrono();

        let mut by_series: BTreeMap<String, Vec<&Observation>> = BTreeMap::new();
        for obs in batch {
            by_series.entry(obs.series.id()).or_default().push(obs);
        }
        for (id, records) in by_series {
            if records.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
                return Err(StoreError::Usage(format!("batch for {id} is not sorted by timestamp")));
            }
            let key = &records[0].series;
            self.register(key)?;
            let present = self.present.entry(id).or_default();
            let mut lines = String::new();
            for obs in records {
                if obs.timestamp < cutoff {
                    report.rejected_stale += 1;
                    continue;
                }
                if !present.insert(obs.timestamp.timestamp()) {
                    report.duplicates += 1;
                    continue;
                }
                lines.push_str(&format_line(obs));
                report.appended += 1;
            }
            if lines.is_empty() {
                continue;
            }
            let path = self.log_path(key);
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
            }
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(|e| StoreError::io(&path, e))?;
            f.write_all(lines.as_bytes())
                .and_then(|_| f.sync_data())
                .map_err(|e| StoreError::io(&path, e))?;
        }
        self.rejected_total += report.rejected();
        Ok(report)
    }

    fn read_all(&self, key: &SeriesKey) -> Result<Vec<Observation>> {
        let path = self.log_path(key);
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(StoreError::io(&path, e)),
        };
        let mut out = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| StoreError::io(&path, e))?;
            if line.is_empty() {
                continue;
            }
            let (ts, value, quality) = parse_line(&line).map_err(|detail| {
                StoreError::format(format!("{}:{}", path.display(), n + 1), detail)
            })?;
            out.push(Observation::new(key.clone(), ts, value, quality, ts)?);
        }
        out.sort_by_key(|o| o.timestamp);
        Ok(out)
    }

    /// Records of `key` with timestamps in `[from, to]`, sorted. Unknown
    /// series give an empty result. The log does not store ingestion time,
    /// so `ingested_at` is reported equal to the timestamp.
    pub fn read(&self, key: &SeriesKey, from: DateTime<Utc>, to: DateTime<Utc>) -> Result<Vec<Observation>> {
        if from > to {
            return Err(StoreError::Usage(format!("read range {from} > {to}")));
        }
        let Some(stored) = self.series.get(&key.id()) else {
            return Ok(Vec::new());
        };
        let mut all = self.read_all(stored)?;
        all.retain(|o| o.timestamp >= from && o.timestamp <= to);
        Ok(all)
    }

    /// Drops every record older than `now - 7 days`; a record exactly seven
    /// days old survives. Returns the number dropped.
    pub fn prune(&mut self, now: DateTime<Utc>) -> Result<usize> {
        let cutoff = now - RETENTION.to_chrono();
        let mut dropped = 0;
        let keys: Vec<SeriesKey> = self.series.values().cloned().collect();
        for key in keys {
            let all = self.read_all(&key)?;
            let keep: Vec<&Observation> = all.iter().filter(|o| o.timestamp >= cutoff).collect();
            let gone = all.len() - keep.len();
            if gone == 0 {
                continue;
            }
            dropped += gone;
            let path = self.log_path(&key);
            let tmp = path.with_extension("log.tmp");
            let body: String = keep.iter().map(|o| format_line(o)).collect();
            let mut f = File::create(&tmp).map_err(|e| StoreError::io(&tmp, e))?;
            f.write_all(body.as_bytes())
                .and_then(|_| f.sync_all())
                .map_err(|e| StoreError::io(&tmp, e))?;
            fs::rename(&tmp, &path).map_err(|e| StoreError::io(&path, e))?;
            self.present.insert(
                key.id(),
                keep.iter().map(|o| o.timestamp.timestamp()).collect(),
            );
        }
        Ok(dropped)
    }

    pub fn record_count(&self) -> usize {
        self.present.values().map(BTreeSet::len).sum()
    }

    /// Bytes used by the log files.
    pub fn bytes(&self) -> Result<u64> {
        let mut total = 0;
        for key in self.series.values() {
            let path = self.log_path(key);
            match fs::metadata(&path) {
                Ok(m) => total += m.len(),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(StoreError::io(&path, e)),
            }
        }
        Ok(total)
    }
}

pub fn format_line(obs: &Observation) -> String {
    format!("{}\t{}\t{}\n", rfc3339(obs.timestamp), obs.value, obs.quality)
}

/// Parses one window-log line (without the trailing newline).
pub fn parse_line(line: &str) -> std::result::Result<(DateTime<Utc>, f64, Quality), String> {
    let mut parts = line.trim_end_matches(['\r', '\n']).split('\t');
    let (Some(ts), Some(value), Some(quality), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(format!("expected 3 tab-separated fields in '{line}'"));
    };
    let ts = parse_rfc3339(ts).map_err(|e| e.to_string())?;
    let value: f64 = value
        .parse()
        .map_err(|_| format!("bad value '{value}'"))?;
    if !value.is_finite() {
        return Err(format!("non-finite value '{value}'"));
    }
    let quality: Quality = quality.parse().map_err(|e: twin_core::CoreError| e.to_string())?;
    Ok((ts, value, quality))
}
