//! Entity model and the `keyValues` JSON shape.
//!
//! In `keyValues` form properties and relationships are flattened onto the
//! entity object. On the way back in, an attribute whose value is a URN
//! string, or a non-empty array of URN strings, is read as a relationship;
//! everything else is a property. `location` is rendered as
//! `{"type": "Point", "coordinates": [lat, lon]}`.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use crate::error::{ContextError, Result};
use crate::geo::GeoPoint;

pub const URN_PREFIX: &str = "urn:ngsi-ld:";

#[derive(Debug, Clone, PartialEq)]
pub struct ContextEntity {
    pub id: String,
    pub entity_type: String,
    pub properties: BTreeMap<String, Value>,
    pub relationships: BTreeMap<String, Vec<String>>,
    pub location: Option<GeoPoint>,
}

const RESERVED: [&str; 3] = ["id", "type", "location"];

/// Splits `urn:ngsi-ld:<Type>:<suffix>` into `(Type, suffix)`.
pub fn parse_urn(urn: &str) -> Option<(&str, &str)> {
    let rest = urn.strip_prefix(URN_PREFIX)?;
    let (ty, suffix) = rest.split_once(':')?;
    let ok = !ty.is_empty()
        && !suffix.is_empty()
        && ty.chars().all(|c| c.is_ascii_alphanumeric())
        && !urn.chars().any(char::is_whitespace);
    ok.then_some((ty, suffix))
}

pub fn is_urn(s: &str) -> bool {
    parse_urn(s).is_some()
}

impl ContextEntity {
    /// `type` is taken from the URN.
    pub fn new(id: &str) -> Result<Self> {
        let (ty, _) = parse_urn(id).ok_or_else(|| ContextError::Usage(format!("malformed URN '{id}'")))?;
        Ok(ContextEntity {
            id: id.to_string(),
            entity_type: ty.to_string(),
            properties: BTreeMap::new(),
            relationships: BTreeMap::new(),
            location: None,
        })
    }

    pub fn with_property(mut self, name: &str, value: Value) -> Self {
        self.properties.insert(name.to_string(), value);
        self
    }

    pub fn with_relationship(mut self, name: &str, targets: &[&str]) -> Self {
        self.relationships
            .insert(name.to_string(), targets.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn with_location(mut self, at: GeoPoint) -> Self {
        self.location = Some(at);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ContextError::Usage(m));
        match parse_urn(&self.id) {
            None => return bad(format!("malformed URN '{}'", self.id)),
            Some((ty, _)) if ty != self.entity_type => {
                return bad(format!("URN '{}' does not match type {}", self.id, self.entity_type))
            }
            _ => {}
        }
        for name in self.properties.keys().chain(self.relationships.keys()) {
            if RESERVED.contains(&name.as_str()) || name.is_empty() {
                return bad(format!("attribute name '{name}' is reserved"));
            }
        }
        if let Some(name) = self.properties.keys().find(|k| self.relationships.contains_key(*k)) {
            return bad(format!("'{name}' is both a property and a relationship"));
        }
        for (name, targets) in &self.relationships {
            if targets.is_empty() {
                return bad(format!("relationship '{name}' has no targets"));
            }
            if let Some(t) = targets.iter().find(|t| !is_urn(t)) {
                return bad(format!("relationship '{name}' target '{t}' is not a URN"));
            }
        }
        if let Some(p) = self.location {
            GeoPoint::new(p.lat, p.lon)?;
        }
        Ok(())
    }

    /// Current value of every attribute, flattened, for change detection.
    pub(crate) fn attributes(&self) -> BTreeMap<String, Value> {
        let mut out: BTreeMap<String, Value> = self.properties.clone();
        for (k, v) in &self.relationships {
            out.insert(k.clone(), json!(v));
        }
        if let Some(p) = self.location {
            out.insert("location".into(), location_json(p));
        }
        out
    }

    pub fn to_key_values(&self) -> Value {
        let mut m = Map::new();
        m.insert("id".into(), json!(self.id));
        m.insert("type".into(), json!(self.entity_type));
        for (k, v) in self.attributes() {
            m.insert(k, v);
        }
        Value::Object(m)
    }

    pub fn from_key_values(v: &Value) -> Result<Self> {
        let bad = |m: &str| ContextError::Usage(m.to_string());
        let obj = v.as_object().ok_or_else(|| bad("entity must be a JSON object"))?;
        let id = obj.get("id").and_then(Value::as_str).ok_or_else(|| bad("entity needs a string id"))?;
        let ty = obj.get("type").and_then(Value::as_str).ok_or_else(|| bad("entity needs a string type"))?;
        let mut e = ContextEntity::new(id)?;
        e.entity_type = ty.to_string();
        for (k, v) in obj {
            match k.as_str() {
                "id" | "type" => {}
                "location" => e.location = Some(parse_location(v)?),
                _ => match as_targets(v) {
                    Some(t) => {
                        e.relationships.insert(k.clone(), t);
                    }
                    None => {
                        e.properties.insert(k.clone(), v.clone());
                    }
                },
            }
        }
        e.validate()?;
        Ok(e)
    }
}

fn as_targets(v: &Value) -> Option<Vec<String>> {
    match v {
        Value::String(s) if is_urn(s) => Some(vec![s.clone()]),
        Value::Array(items) if !items.is_empty() => items
            .iter()
            .map(|i| i.as_str().filter(|s| is_urn(s)).map(str::to_string))
            .collect(),
        _ => None,
    }
}

fn location_json(p: GeoPoint) -> Value {
    json!({"type": "Point", "coordinates": [p.lat, p.lon]})
}

fn parse_location(v: &Value) -> Result<GeoPoint> {
    let bad = || ContextError::Usage(format!("location must be a Point with [lat, lon], got {v}"));
    if v.get("type").and_then(Value::as_str) != Some("Point") {
        return Err(bad());
    }
    let c = v.get("coordinates").and_then(Value::as_array).ok_or_else(bad)?;
    match c.as_slice() {
        [lat, lon] => GeoPoint::new(lat.as_f64().ok_or_else(bad)?, lon.as_f64().ok_or_else(bad)?),
        _ => Err(bad()),
    }
}
