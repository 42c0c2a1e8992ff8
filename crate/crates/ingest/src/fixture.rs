//! Replays recorded samples as if a source were publishing them live.
//!
//! A fixture uses the window-log text format. The station and source-native
//! field name come from the path: `<source>/<station>/<field>.log`. Passing
//! the `<source>` directory replays every log file below it; passing a
//! single file replays just that series.
//!
//! Unlike the window store, the value column is handed to the mediator as
//! text, so a fixture can carry source conventions such as decimal commas.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};

use crate::adapter::{parse_timestamp, FieldMapping, RawBatch, RawRecord, Reject, SourceAdapter};
use crate::error::{IngestError, Result};

#[derive(Debug, Clone)]
struct Entry {
    /// `None` for malformed lines before any readable timestamp.
    original: Option<DateTime<Utc>>,
    record: Result<RawRecord, Reject>,
}

#[derive(Debug)]
pub struct FixtureAdapter {
    source_id: String,
    mapping: FieldMapping,
    speed: f64,
    entries: Vec<Entry>,
    cursor: usize,
    anchor: Option<DateTime<Utc>>,
    first: Option<DateTime<Utc>>,
}

/// Loads a fixture file or directory. `speed` scales the original
/// inter-arrival times by `1/speed`; `f64::INFINITY` releases everything
/// on the first poll.
pub fn replay_fixture(path: &Path, speed: f64) -> Result<FixtureAdapter> {
    if !(speed > 0.0) {
        return Err(IngestError::Usage(format!("replay speed must be positive, got {speed}")));
    }
    let (source_id, files) = if path.is_dir() {
        let mut files = Vec::new();
        for station in read_dir_sorted(path)? {
            if station.is_dir() {
                files.extend(
                    read_dir_sorted(&station)?
                        .into_iter()
                        .filter(|p| p.extension().is_some_and(|e| e == "log")),
                );
            }
        }
        (file_name(path), files)
    } else {
        let source = path
            .parent()
            .and_then(Path::parent)
            .map(file_name)
            .unwrap_or_default();
        (source, vec![path.to_path_buf()])
    };
    if source_id.is_empty() {
        return Err(IngestError::Usage(format!(
            "cannot derive a source id from {}",
            path.display()
        )));
    }

    let mut entries = Vec::new();
    let mut fields = Vec::new();
    for file in &files {
        let station = file.parent().map(file_name).unwrap_or_default();
        let field = file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        fields.push(field.clone());
        let body = fs::read_to_string(file).map_err(|e| IngestError::Config {
            path: file.display().to_string(),
            detail: e.to_string(),
        })?;
        // Malformed lines are released alongside the previous good line.
        let mut last = None;
        for (n, line) in body.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match parse_fixture_line(line) {
                Some((ts, value)) => {
                    last = Some(ts);
                    entries.push(Entry {
                        original: Some(ts),
                        record: Ok(RawRecord {
                            station_id: station.clone(),
                            field: field.clone(),
                            timestamp: ts.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                            value,
                        }),
                    });
                }
                None => entries.push(Entry {
                    original: last,
                    record: Err(Reject {
                        source_id: source_id.clone(),
                        record: format!("{}:{}: {line}", file.display(), n + 1),
                        reason: "malformed fixture line".into(),
                    }),
                }),
            }
        }
    }
    entries.sort_by_key(|e| e.original);
    fields.sort();
    fields.dedup();
    let first = entries.iter().find_map(|e| e.original);
    Ok(FixtureAdapter {
        mapping: FieldMapping::identity(fields.iter().map(String::as_str)),
        source_id,
        speed,
        entries,
        cursor: 0,
        anchor: None,
        first,
    })
}

/// `<timestamp>\t<value>[\t<quality>]`. The quality column, when present,
/// must be a known word; the value stays unparsed.
fn parse_fixture_line(line: &str) -> Option<(DateTime<Utc>, String)> {
    let cols: Vec<&str> = line.split('\t').collect();
    if !(2..=3).contains(&cols.len()) {
        return None;
    }
    if let Some(q) = cols.get(2) {
        q.parse::<twin_core::Quality>().ok()?;
    }
    let ts = parse_timestamp(cols[0])?;
    Some((ts, cols[1].to_string()))
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = fs::read_dir(dir).map_err(|e| IngestError::Config {
        path: dir.display().to_string(),
        detail: e.to_string(),
    })?;
    let mut out: Vec<PathBuf> = rd.filter_map(|e| e.ok().map(|e| e.path())).collect();
    out.sort();
    Ok(out)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

impl FixtureAdapter {
    pub fn with_mapping(mut self, mapping: FieldMapping) -> Self {
        self.mapping = mapping;
        self
    }

    pub fn with_source_id(mut self, source_id: &str) -> Self {
        self.source_id = source_id.to_string();
        self
    }

    /// Pins the replay start; otherwise it is the `now` of the first poll.
    pub fn starting_at(mut self, anchor: DateTime<Utc>) -> Self {
        self.anchor = Some(anchor);
        self
    }

    pub fn remaining(&self) -> usize {
        self.entries.len() - self.cursor
    }

    fn release_time(&self, anchor: DateTime<Utc>, original: Option<DateTime<Utc>>) -> DateTime<Utc> {
        let (Some(original), Some(first)) = (original, self.first) else {
            return anchor;
        };
        if self.speed.is_infinite() {
            return anchor;
        }
        let offset = (original - first).num_seconds() as f64 / self.speed;
        anchor + Duration::milliseconds((offset * 1000.0).round() as i64)
    }
}

impl SourceAdapter for FixtureAdapter {
    fn source_id(&self) -> &str {
        &self.source_id
    }

    fn mapping(&self) -> &FieldMapping {
        &self.mapping
    }

    /// Returns every record released by `now` that earlier polls have not
    /// returned yet.
    fn poll(&mut self, _since: DateTime<Utc>, now: DateTime<Utc>) -> Result<RawBatch> {
        let anchor = *self.anchor.get_or_insert(now);
        let mut batch = RawBatch::default();
        while self.cursor < self.entries.len() {
            let e = &self.entries[self.cursor];
            if self.release_time(anchor, e.original) > now {
                break;
            }
            match &e.record {
                Ok(r) => batch.records.push(r.clone()),
                Err(r) => batch.malformed.push(r.clone()),
            }
            self.cursor += 1;
        }
        Ok(batch)
    }
}
