//! Generic JSON pull adapter.
//!
//! The URL template may contain `{since}` and `{now}`, replaced with RFC3339
//! instants. The response must be a JSON array of objects:
//!
//! ```json
//! [{"station_id": "06A01", "field": "caudal", "timestamp": "2024-06-02T10:00:00Z", "value": "1,5"}]
//! ```
//!
//! `value` may be a string or a number. Elements that are not of this shape
//! become malformed rejects. Only plain `http://` is supported; put a local
//! TLS-terminating proxy in front of HTTPS sources.

use std::time::Duration;

use chrono::{DateTime, Utc};
use serde_json::Value;
use twin_core::time::rfc3339;

use crate::adapter::{FieldMapping, RawBatch, RawRecord, Reject, SourceAdapter};
use crate::error::{IngestError, Result};

pub struct HttpPullAdapter {
    source_id: String,
    url_template: String,
    mapping: FieldMapping,
    client: reqwest::blocking::Client,
}

impl HttpPullAdapter {
    pub fn new(source_id: &str, url_template: &str, mapping: FieldMapping, timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| IngestError::transport(source_id, e.to_string()))?;
        Ok(HttpPullAdapter {
            source_id: source_id.to_string(),
            url_template: url_template.to_string(),
            mapping,
            client,
        })
    }

    pub fn url(&self, since: DateTime<Utc>, now: DateTime<Utc>) -> String {
        self.url_template
            .replace("{since}", &rfc3339(since))
            .replace("{now}", &rfc3339(now))
    }
}

/// Splits a decoded response body into records and malformed entries.
pub fn parse_response(source_id: &str, body: &Value) -> Result<RawBatch> {
    let Some(items) = body.as_array() else {
        return Err(IngestError::transport(source_id, "response is not a JSON array"));
    };
    let mut batch = RawBatch::default();
    for item in items {
        let text = |k: &str| item.get(k).and_then(Value::as_str).map(str::to_string);
        let value = match item.get("value") {
            Some(Value::String(s)) => Some(s.clone()),
            Some(Value::Number(n)) => Some(n.to_string()),
            _ => None,
        };
        match (text("station_id"), text("field"), text("timestamp"), value) {
            (Some(station_id), Some(field), Some(timestamp), Some(value)) => batch.records.push(RawRecord {
                station_id,
                field,
                timestamp,
                value,
            }),
            _ => batch.malformed.push(Reject {
                source_id: source_id.to_string(),
                record: item.to_string(),
                reason: "malformed response element".into(),
            }),
        }
    }
    Ok(batch)
}

impl SourceAdapter for HttpPullAdapter {
    fn source_id(&self) -> &str {
        &self.source_id
    }

    fn mapping(&self) -> &FieldMapping {
        &self.mapping
    }

    fn poll(&mut self, since: DateTime<Utc>, now: DateTime<Utc>) -> Result<RawBatch> {
        let url = self.url(since, now);
        let fail = |e: reqwest::Error| IngestError::transport(&self.source_id, e.to_string());
        let resp = self
            .client
            .get(&url)
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(fail)?;
        let body: Value = resp.json().map_err(fail)?;
        parse_response(&self.source_id, &body)
    }
}
