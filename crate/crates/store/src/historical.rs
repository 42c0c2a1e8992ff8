//! Compacted, validated history: immutable segment files plus an index.
//!
//! Layout under the root:
//!
//! ```text
//! index.json              segment index, replaced atomically on every write
//! segments/<id>.lgtw      one columnar segment per (series, week)
//! ```
//!
//! A segment file is written to a temporary name, synced, and renamed
//! before the index that references it is published, so readers never see
//! a half-written segment.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use twin_core::time::from_unix;
use twin_core::{Observation, Quality, SeriesKey};

use crate::error::{Result, StoreError};
use crate::segment::{self, SegmentRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentMeta {
    pub id: String,
    pub series: SeriesKey,
    /// Compaction week this segment came from (RFC3339 week end).
    pub week: String,
    /// Unix seconds, inclusive.
    pub from: i64,
    pub to: i64,
    pub records: u64,
    pub crc32: u32,
    pub bytes: u64,
    pub file: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Index {
    next_id: u64,
    segments: Vec<SegmentMeta>,
    /// `(series id, week)` pairs already compacted, with or without a segment.
    compacted: BTreeSet<(String, String)>,
}

/// A segment waiting to be written as part of one atomic batch.
#[derive(Debug, Clone)]
pub struct PendingSegment {
    pub series: SeriesKey,
    pub week: String,
    pub records: Vec<Observation>,
}

#[derive(Debug)]
pub struct HistoricalStore {
    root: PathBuf,
    index: Index,
}

impl HistoricalStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let seg_dir = root.join("segments");
        fs::create_dir_all(&seg_dir).map_err(|e| StoreError::io(&seg_dir, e))?;
        let path = root.join("index.json");
        let index = if path.exists() {
            let body = fs::read(&path).map_err(|e| StoreError::io(&path, e))?;
            serde_json::from_slice(&body)
                .map_err(|e| StoreError::format("historical index", e.to_string()))?
        } else {
            Index::default()
        };
        Ok(HistoricalStore { root, index })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn segments(&self) -> &[SegmentMeta] {
        &self.index.segments
    }

    pub fn series(&self) -> BTreeSet<SeriesKey> {
        self.index.segments.iter().map(|s| s.series.clone()).collect()
    }

    pub fn is_compacted(&self, series: &SeriesKey, week: &str) -> bool {
        self.index
            .compacted
            .contains(&(series.id(), week.to_string()))
    }

    pub fn record_count(&self) -> u64 {
        self.index.segments.iter().map(|s| s.records).sum()
    }

    pub fn bytes(&self) -> u64 {
        self.index.segments.iter().map(|s| s.bytes).sum()
    }

    fn overlapping(&self, series: &SeriesKey, from: i64, to: i64) -> Option<&SegmentMeta> {
        self.index
            .segments
            .iter()
            .find(|s| s.series.same_series(series) && s.from <= to && from <= s.to)
    }

    /// Writes a batch of segments and marks their weeks compacted, all or
    /// nothing with respect to overlap checks: if any segment would overlap
    /// an existing one of the same series, nothing is written.
    /// Entries with no records only mark the week.
    pub fn write_batch(&mut self, batch: Vec<PendingSegment>) -> Result<Vec<SegmentMeta>> {
        let mut planned: Vec<(SeriesKey, i64, i64)> = Vec::new();
        for p in &batch {
            if p.records.is_empty() {
                continue;
            }
            if let Some(o) = p.records.iter().find(|o| !o.series.same_series(&p.series)) {
                return Err(StoreError::Usage(format!(
                    "record of {} in segment for {}",
                    o.series.id(),
                    p.series.id()
                )));
            }
            if p.records.iter().any(|o| o.quality == Quality::Rejected) {
                return Err(StoreError::Usage(format!(
                    "rejected records cannot enter history ({})",
                    p.series.id()
                )));
            }
            if p.records.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
                return Err(StoreError::Usage(format!(
                    "segment records for {} must be strictly increasing in time",
                    p.series.id()
                )));
            }
            let from = p.records[0].timestamp.timestamp();
            let to = p.records[p.records.len() - 1].timestamp.timestamp();
            if let Some(existing) = self.overlapping(&p.series, from, to) {
                return Err(StoreError::Conflict(format!(
                    "{} [{}, {}] overlaps segment {}",
                    p.series.id(),
                    from_unix(from),
                    from_unix(to),
                    existing.id
                )));
            }
            if planned
                .iter()
                .any(|(k, f, t)| k.same_series(&p.series) && *f <= to && from <= *t)
            {
                return Err(StoreError::Conflict(format!(
                    "batch contains overlapping segments for {}",
                    p.series.id()
                )));
            }
            planned.push((p.series.clone(), from, to));
        }

        let mut next = self.index.clone();
        let mut written = Vec::new();
        for p in batch {
            next.compacted.insert((p.series.id(), p.week.clone()));
            if p.records.is_empty() {
                continue;
            }
            next.next_id += 1;
            let id = format!("{:08}", next.next_id);
            let records: Vec<SegmentRecord> = p
                .records
                .iter()
                .map(|o| SegmentRecord {
                    timestamp: o.timestamp.timestamp(),
                    value: o.value,
                    quality: o.quality,
                })
                .collect();
            let bytes = segment::encode(&p.series, &records)?;
            let crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
            let file = format!("segments/{id}.lgtw");
            write_durable(&self.root.join(&file), &bytes)?;
            let meta = SegmentMeta {
                id,
                series: p.series.clone(),
                week: p.week,
                from: records[0].timestamp,
                to: records[records.len() - 1].timestamp,
                records: records.len() as u64,
                crc32: crc,
                bytes: bytes.len() as u64,
                file,
            };
            next.segments.push(meta.clone());
            written.push(meta);
        }
        let body = serde_json::to_vec_pretty(&next).expect("index serializes");
        write_durable(&self.root.join("index.json"), &body)?;
        self.index = next;
        Ok(written)
    }

    /// Convenience for a single segment.
    pub fn write_segment(&mut self, series: &SeriesKey, week: &str, records: Vec<Observation>) -> Result<Option<SegmentMeta>> {
        let mut out = self.write_batch(vec![PendingSegment {
            series: series.clone(),
            week: week.to_string(),
            records,
        }])?;
        Ok(out.pop())
    }

    /// Sorted records of `series` in `[from, to]` across all segments.
    /// Every touched segment is checksum-verified.
    pub fn read(&self, series: &SeriesKey, from: DateTime<Utc>, to: DateTime<Utc>) -> Result<Vec<Observation>> {
        if from > to {
            return Err(StoreError::Usage(format!("read range {from} > {to}")));
        }
        let (f, t) = (from.timestamp(), to.timestamp());
        let mut out = Vec::new();
        for meta in self
            .index
            .segments
            .iter()
            .filter(|s| s.series.same_series(series) && s.from <= t && f <= s.to)
        {
            let path = self.root.join(&meta.file);
            let bytes = fs::read(&path).map_err(|e| StoreError::io(&path, e))?;
            let (key, records) = segment::decode(&bytes, &meta.id)?;
            for r in records.into_iter().filter(|r| r.timestamp >= f && r.timestamp <= t) {
                let ts = from_unix(r.timestamp);
                out.push(Observation::new(key.clone(), ts, r.value, r.quality, ts)?);
            }
        }
        out.sort_by_key(|o| o.timestamp);
        Ok(out)
    }
}

fn write_durable(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(|e| StoreError::io(&tmp, e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| StoreError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| StoreError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use twin_core::time::parse_rfc3339;

    fn key() -> SeriesKey {
        SeriesKey::new("ctd-imida", "st-3", "oxygen", "mg/l")
    }

    fn obs(secs: i64, v: f64) -> Observation {
        Observation::measured(key(), from_unix(secs), v).unwrap()
    }

    #[test]
    fn read_merges_two_segments() {
        let dir = tempfile::tempdir().unwrap();
        let mut h = HistoricalStore::open(dir.path()).unwrap();
        h.write_segment(&key(), "w1", vec![obs(100, 1.0), obs(200, 2.0)]).unwrap();
        h.write_segment(&key(), "w2", vec![obs(300, 3.0), obs(400, 4.0)]).unwrap();
        let h = HistoricalStore::open(dir.path()).unwrap();
        let got = h.read(&key(), from_unix(150), from_unix(350)).unwrap();
        // hand merge: 200 from w1, 300 from w2
        assert_eq!(got.iter().map(|o| o.value).collect::<Vec<_>>(), vec![2.0, 3.0]);
        assert!(h.is_compacted(&key(), "w1"));
    }

    #[test]
    fn overlap_is_conflict_and_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut h = HistoricalStore::open(dir.path()).unwrap();
        h.write_segment(&key(), "w1", vec![obs(100, 1.0), obs(200, 2.0)]).unwrap();
        let err = h.write_segment(&key(), "w2", vec![obs(150, 1.5)]).unwrap_err();
        assert!(matches!(err, StoreError::Conflict(_)));
        assert_eq!(h.segments().len(), 1);
        assert!(!h.is_compacted(&key(), "w2"));
    }

    #[test]
    fn rejected_records_never_enter() {
        let dir = tempfile::tempdir().unwrap();
        let mut h = HistoricalStore::open(dir.path()).unwrap();
        let mut bad = obs(100, 1.0);
        bad.quality = Quality::Rejected;
        assert!(h.write_segment(&key(), "w1", vec![bad]).is_err());
    }

    #[test]
    fn corrupted_segment_names_itself() {
        let dir = tempfile::tempdir().unwrap();
        let mut h = HistoricalStore::open(dir.path()).unwrap();
        let meta = h.write_segment(&key(), "w1", vec![obs(100, 1.0)]).unwrap().unwrap();
        let path = dir.path().join(&meta.file);
        let mut bytes = fs::read(&path).unwrap();
        bytes[10] ^= 0xff;
        fs::write(&path, bytes).unwrap();
        match h.read(&key(), from_unix(0), from_unix(1000)) {
            Err(StoreError::Integrity { segment, .. }) => assert_eq!(segment, meta.id),
            other => panic!("expected integrity error, got {other:?}"),
        }
    }

    #[test]
    fn empty_range_and_inverted_range() {
        let dir = tempfile::tempdir().unwrap();
        let h = HistoricalStore::open(dir.path()).unwrap();
        let t = parse_rfc3339("2024-01-01T00:00:00Z").unwrap();
        assert!(h.read(&key(), t, t).unwrap().is_empty());
        assert!(h.read(&key(), t, t - chrono::Duration::hours(1)).is_err());
    }
}
