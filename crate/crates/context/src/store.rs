use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::entity::ContextEntity;
use crate::error::{ContextError, Result};
use crate::geo::{haversine_m, GeoPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedValue {
    pub observed_at: DateTime<Utc>,
    pub value: Value,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntityFilter {
    pub entity_type: Option<String>,
    /// Centre and maximum distance in meters.
    pub near: Option<(GeoPoint, f64)>,
}

impl EntityFilter {
    pub fn matches(&self, e: &ContextEntity) -> bool {
        if self.entity_type.as_ref().is_some_and(|t| *t != e.entity_type) {
            return false;
        }
        match (self.near, e.location) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some((centre, max)), Some(at)) => haversine_m(centre, at) <= max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DanglingRelationship {
    pub entity: String,
    pub relationship: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq)]
struct Record {
    entity: ContextEntity,
    version: u64,
    temporal: BTreeMap<String, Vec<TimedValue>>,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    version: u64,
    entity: Value,
    temporal: BTreeMap<String, Vec<TimedValue>>,
}

/// Current entity state plus per-attribute history. With a directory, every
/// mutating call rewrites the snapshot of each entity it touched.
#[derive(Debug, Clone, Default)]
pub struct ContextStore {
    records: BTreeMap<String, Record>,
    dir: Option<PathBuf>,
    dirty: BTreeSet<String>,
}

/// Inserts keeping strict order; an equal instant replaces the value.
fn insert_point(seq: &mut Vec<TimedValue>, observed_at: DateTime<Utc>, value: Value) {
    match seq.binary_search_by_key(&observed_at, |p| p.observed_at) {
        Ok(i) => seq[i].value = value,
        Err(i) => seq.insert(i, TimedValue { observed_at, value }),
    }
}

fn file_name(id: &str) -> String {
    let mut s = String::with_capacity(id.len() + 5);
    for c in id.chars() {
        match c {
            '%' => s.push_str("%25"),
            ':' => s.push_str("%3A"),
            '/' => s.push_str("%2F"),
            c => s.push(c),
        }
    }
    s.push_str(".json");
    s
}

impl ContextStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads every `*.json` snapshot under `dir`, creating it if needed.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| ContextError::io(&dir, e))?;
        let mut records = BTreeMap::new();
        let entries = fs::read_dir(&dir).map_err(|e| ContextError::io(&dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| ContextError::io(&dir, e))?.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let rec = load_snapshot(&path)?;
            records.insert(rec.entity.id.clone(), rec);
        }
        Ok(ContextStore {
            records,
            dir: Some(dir),
            dirty: BTreeSet::new(),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ContextEntity> {
        self.records.get(id).map(|r| &r.entity)
    }

    pub fn version(&self, id: &str) -> Option<u64> {
        self.records.get(id).map(|r| r.version)
    }

    /// Replaces the entity's current state. Each attribute that is new,
    /// changed or removed gets one temporal point at `at` (removal records
    /// `null`). Identical content is a no-op returning the same version.
    pub fn upsert_entity(&mut self, entity: ContextEntity, at: DateTime<Utc>) -> Result<u64> {
        let v = self.upsert_entity_unflushed(entity, at)?;
        self.flush()?;
        Ok(v)
    }

    pub(crate) fn upsert_entity_unflushed(&mut self, entity: ContextEntity, at: DateTime<Utc>) -> Result<u64> {
        entity.validate()?;
        let new_attrs = entity.attributes();
        let id = entity.id.clone();
        let rec = match self.records.get_mut(&id) {
            Some(rec) => {
                if rec.entity == entity {
                    return Ok(rec.version);
                }
                if rec.entity.entity_type != entity.entity_type {
                    return Err(ContextError::Usage(format!(
                        "{id} exists with type {}",
                        rec.entity.entity_type
                    )));
                }
                let old_attrs = rec.entity.attributes();
                for (k, v) in &new_attrs {
                    if old_attrs.get(k) != Some(v) {
                        insert_point(rec.temporal.entry(k.clone()).or_default(), at, v.clone());
                    }
                }
                for k in old_attrs.keys().filter(|k| !new_attrs.contains_key(*k)) {
                    insert_point(rec.temporal.entry(k.clone()).or_default(), at, Value::Null);
                }
                rec.entity = entity;
                rec.version += 1;
                rec
            }
            None => {
                let temporal = new_attrs
                    .into_iter()
                    .map(|(k, v)| (k, vec![TimedValue { observed_at: at, value: v }]))
                    .collect();
                self.records.entry(id.clone()).or_insert(Record {
                    entity,
                    version: 1,
                    temporal,
                })
            }
        };
        let version = rec.version;
        self.dirty.insert(id);
        Ok(version)
    }

    /// Adds one history point without touching the current state or
    /// version. Used for measurements, whose values live only in history.
    pub fn append_point(&mut self, id: &str, attribute: &str, observed_at: DateTime<Utc>, value: Value) -> Result<()> {
        self.append_inner(id, attribute, observed_at, value)?;
        self.flush()
    }

    pub(crate) fn append_inner(&mut self, id: &str, attribute: &str, observed_at: DateTime<Utc>, value: Value) -> Result<()> {
        let rec = self
            .records
            .get_mut(id)
            .ok_or_else(|| ContextError::Usage(format!("unknown entity {id}")))?;
        insert_point(rec.temporal.entry(attribute.to_string()).or_default(), observed_at, value);
        self.dirty.insert(id.to_string());
        Ok(())
    }

    /// Runs several writes and persists once at the end.
    pub(crate) fn batch<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let out = f(self);
        self.flush()?;
        out
    }

    /// Matching entities sorted by id.
    pub fn query(&self, filter: &EntityFilter) -> Result<Vec<&ContextEntity>> {
        if let Some((_, max)) = filter.near {
            if !(max >= 0.0) {
                return Err(ContextError::Usage(format!("maxDistance must be >= 0, got {max}")));
            }
        }
        Ok(self
            .records
            .values()
            .map(|r| &r.entity)
            .filter(|e| filter.matches(e))
            .collect())
    }

    /// Points with `from <= observed_at <= to`. Unknown entity or
    /// attribute, or `from > to`, gives an empty result.
    pub fn temporal_query(&self, id: &str, attribute: &str, from: DateTime<Utc>, to: DateTime<Utc>) -> Vec<TimedValue> {
        let Some(seq) = self.records.get(id).and_then(|r| r.temporal.get(attribute)) else {
            return Vec::new();
        };
        if from > to {
            return Vec::new();
        }
        let lo = seq.partition_point(|p| p.observed_at < from);
        let hi = seq.partition_point(|p| p.observed_at <= to);
        seq[lo..hi].to_vec()
    }

    pub fn temporal_attributes(&self, id: &str) -> Vec<&str> {
        self.records
            .get(id)
            .map(|r| r.temporal.keys().map(String::as_str).collect())
            .unwrap_or_default()
    }

    /// Relationship targets that name no stored entity.
    pub fn lint(&self) -> Vec<DanglingRelationship> {
        let mut out = Vec::new();
        for r in self.records.values() {
            for (name, targets) in &r.entity.relationships {
                for t in targets.iter().filter(|t| !self.records.contains_key(*t)) {
                    out.push(DanglingRelationship {
                        entity: r.entity.id.clone(),
                        relationship: name.clone(),
                        target: t.clone(),
                    });
                }
            }
        }
        out
    }

    fn flush(&mut self) -> Result<()> {
        let Some(dir) = self.dir.clone() else {
            self.dirty.clear();
            return Ok(());
        };
        for id in std::mem::take(&mut self.dirty) {
            let rec = &self.records[&id];
            let snap = Snapshot {
                version: rec.version,
                entity: rec.entity.to_key_values(),
                temporal: rec.temporal.clone(),
            };
            let path = dir.join(file_name(&id));
            let tmp = path.with_extension("json.tmp");
            let body = serde_json::to_vec_pretty(&snap).expect("snapshot serializes");
            fs::write(&tmp, body)
                .and_then(|_| fs::rename(&tmp, &path))
                .map_err(|e| ContextError::io(&path, e))?;
        }
        Ok(())
    }
}

fn load_snapshot(path: &Path) -> Result<Record> {
    let err = |detail: String| ContextError::Snapshot {
        path: path.display().to_string(),
        detail,
    };
    let body = fs::read(path).map_err(|e| ContextError::io(path, e))?;
    let snap: Snapshot = serde_json::from_slice(&body).map_err(|e| err(e.to_string()))?;
    let entity = ContextEntity::from_key_values(&snap.entity).map_err(|e| err(e.to_string()))?;
    for (k, seq) in &snap.temporal {
        if seq.windows(2).any(|w| w[0].observed_at >= w[1].observed_at) {
            return Err(err(format!("history of '{k}' is not strictly sorted")));
        }
    }
    Ok(Record {
        entity,
        version: snap.version,
        temporal: snap.temporal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::device_015;
    use serde_json::json;
    use twin_core::time::parse_rfc3339;

    fn t(s: &str) -> DateTime<Utc> {
        parse_rfc3339(s).unwrap()
    }

    #[test]
    fn create_identical_and_changed_upserts() {
        let mut s = ContextStore::in_memory();
        let at = t("2024-06-02T23:55:00Z");
        assert_eq!(s.upsert_entity(device_015(), at).unwrap(), 1);
        let ctl = &s.get("urn:ngsi-ld:Device:015").unwrap().properties["controlledProperty"];
        assert_eq!(ctl.as_array().unwrap().len(), 5);

        let before = s.temporal_query("urn:ngsi-ld:Device:015", "name", at, at + chrono::Duration::days(1));
        assert_eq!(s.upsert_entity(device_015(), at + chrono::Duration::hours(1)).unwrap(), 1);
        let after = s.temporal_query("urn:ngsi-ld:Device:015", "name", at, at + chrono::Duration::days(1));
        assert_eq!(before, after);

        let changed = device_015().with_property("name", json!("renamed"));
        let later = at + chrono::Duration::hours(2);
        assert_eq!(s.upsert_entity(changed, later).unwrap(), 2);
        let name = s.temporal_query("urn:ngsi-ld:Device:015", "name", later, later);
        assert_eq!(name.len(), 1);
        assert_eq!(name[0].value, json!("renamed"));
        // Only the changed attribute got a point.
        let untouched = s.temporal_query("urn:ngsi-ld:Device:015", "areaServed", later, later);
        assert!(untouched.is_empty());
    }

    #[test]
    fn removed_attribute_records_null() {
        let mut s = ContextStore::in_memory();
        let at = t("2024-06-02T00:00:00Z");
        s.upsert_entity(device_015(), at).unwrap();
        let mut e = device_015();
        e.properties.remove("areaServed");
        s.upsert_entity(e, at + chrono::Duration::hours(1)).unwrap();
        let h = s.temporal_query("urn:ngsi-ld:Device:015", "areaServed", at, at + chrono::Duration::hours(1));
        assert_eq!(h.len(), 2);
        assert_eq!(h[1].value, Value::Null);
    }

    fn reading(v: i64) -> ContextEntity {
        ContextEntity::new("urn:ngsi-ld:Buoy:1").unwrap().with_property("value", json!(v))
    }

    #[test]
    fn temporal_ranges() {
        let mut s = ContextStore::in_memory();
        let t1 = t("2024-06-01T00:00:00Z");
        let t2 = t("2024-06-02T00:00:00Z");
        let t3 = t("2024-06-03T00:00:00Z");
        for (i, at) in [t1, t2, t3].into_iter().enumerate() {
            s.upsert_entity(reading(i as i64), at).unwrap();
        }
        let all = s.temporal_query("urn:ngsi-ld:Buoy:1", "value", t1, t3);
        assert_eq!(all.iter().map(|p| p.value.clone()).collect::<Vec<_>>(), vec![json!(0), json!(1), json!(2)]);
        assert!(s
            .temporal_query("urn:ngsi-ld:Buoy:1", "value", t("2020-01-01T00:00:00Z"), t("2020-02-01T00:00:00Z"))
            .is_empty());
        let mid = s.temporal_query("urn:ngsi-ld:Buoy:1", "value", t("2024-06-01T12:00:00Z"), t("2024-06-02T12:00:00Z"));
        assert_eq!(mid, vec![TimedValue { observed_at: t2, value: json!(1) }]);
        assert!(s.temporal_query("urn:ngsi-ld:Buoy:1", "nothing", t1, t3).is_empty());
        assert!(s.temporal_query("urn:ngsi-ld:Buoy:9", "value", t1, t3).is_empty());
    }

    #[test]
    fn geo_queries_on_listing_device() {
        let mut s = ContextStore::in_memory();
        s.upsert_entity(device_015(), t("2024-06-02T23:55:00Z")).unwrap();
        s.upsert_entity(reading(1), t("2024-06-02T23:55:00Z")).unwrap();
        let centre = GeoPoint::new(37.7544, -0.8586).unwrap();
        let near = |m: f64| EntityFilter {
            entity_type: Some("Device".into()),
            near: Some((centre, m)),
        };
        let hits = s.query(&near(1000.0)).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].id, "urn:ngsi-ld:Device:015");
        assert!(s.query(&near(5.0)).unwrap().is_empty());
        assert_eq!(s.query(&EntityFilter::default()).unwrap().len(), 2);
        assert!(s.query(&near(-1.0)).is_err());
    }

    #[test]
    fn lint_flags_dangling_targets() {
        let mut s = ContextStore::in_memory();
        s.upsert_entity(device_015(), t("2024-06-02T00:00:00Z")).unwrap();
        let lint = s.lint();
        assert_eq!(lint.len(), 1);
        assert_eq!(lint[0].target, "urn:ngsi-ld:SoundingPlace:003");
        let place = ContextEntity::new("urn:ngsi-ld:SoundingPlace:003").unwrap();
        s.upsert_entity(place, t("2024-06-02T00:00:00Z")).unwrap();
        assert!(s.lint().is_empty());
    }

    #[test]
    fn snapshots_reload() {
        let dir = tempfile::tempdir().unwrap();
        let at = t("2024-06-02T00:00:00Z");
        {
            let mut s = ContextStore::open(dir.path().join("context")).unwrap();
            s.upsert_entity(device_015(), at).unwrap();
            s.upsert_entity(reading(4), at).unwrap();
            s.upsert_entity(reading(5), at + chrono::Duration::hours(1)).unwrap();
        }
        let s = ContextStore::open(dir.path().join("context")).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.version("urn:ngsi-ld:Buoy:1"), Some(2));
        assert_eq!(s.get("urn:ngsi-ld:Device:015"), Some(&device_015()));
        assert_eq!(s.temporal_query("urn:ngsi-ld:Buoy:1", "value", at, at + chrono::Duration::hours(1)).len(), 2);
        let files = fs::read_dir(dir.path().join("context")).unwrap().count();
        assert_eq!(files, 2);
    }
}
