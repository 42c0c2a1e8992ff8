//! Declarative plausibility rules applied before data enters history.
//!
//! The rule file is JSON keyed by variable name:
//!
//! ```json
//! { "salinity": { "min": 0.0, "max": 70.0, "max_step": 5.0 } }
//! ```
//!
//! Every field is optional. `max_step` bounds the absolute change from the
//! previous accepted reading of the same series.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use twin_core::{Observation, Quality};

use crate::error::{Result, StoreError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RejectReason {
    /// Outside `[min, max]`.
    Range,
    /// Jumped more than `max_step` from the previous accepted reading.
    Step,
    /// Already marked rejected upstream.
    Flagged,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::Range => "range",
            RejectReason::Step => "step",
            RejectReason::Flagged => "flagged",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidationRules {
    rules: BTreeMap<String, ValidationRule>,
}

impl ValidationRules {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, variable: &str, rule: ValidationRule) -> Self {
        self.rules.insert(variable.to_string(), rule);
        self
    }

    pub fn get(&self, variable: &str) -> Option<&ValidationRule> {
        self.rules.get(variable)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = std::fs::read(path).map_err(|e| StoreError::io(path, e))?;
        serde_json::from_slice(&body).map_err(|e| StoreError::format("validation rules", e.to_string()))
    }

    /// Physical plausibility bounds for the lagoon variables.
    pub fn lagoon_defaults() -> Self {
        let r = |min, max, step| ValidationRule {
            min: Some(min),
            max: Some(max),
            max_step: step,
        };
        ValidationRules::new()
            .with("temperature", r(-10.0, 50.0, Some(10.0)))
            .with("water_temperature", r(-2.0, 40.0, Some(5.0)))
            .with("air_temperature", r(-20.0, 55.0, Some(15.0)))
            .with("salinity", r(0.0, 70.0, Some(5.0)))
            .with("conductivity", r(0.0, 200_000.0, None))
            .with("oxygen", r(0.0, 25.0, None))
            .with("chlorophyll", r(0.0, 500.0, None))
            .with("turbidity", r(0.0, 4000.0, None))
            .with("transparency", r(0.0, 10.0, None))
            .with("streamflow", r(0.0, 5000.0, None))
            .with("rain", r(0.0, 500.0, None))
            .with("precipitation", r(0.0, 500.0, None))
            .with("relative_humidity", r(0.0, 100.0, None))
            .with("ph", r(0.0, 14.0, None))
    }

    /// Judges one series' records (sorted by time). Returns, per record,
    /// `None` if accepted or the reason it was rejected.
    pub fn check_series(&self, records: &[Observation]) -> Vec<Option<RejectReason>> {
        let mut prev: Option<f64> = None;
        records
            .iter()
            .map(|o| {
                if o.quality == Quality::Rejected {
                    return Some(RejectReason::Flagged);
                }
                let Some(rule) = self.rules.get(&o.series.variable) else {
                    prev = Some(o.value);
                    return None;
                };
                if rule.min.is_some_and(|m| o.value < m) || rule.max.is_some_and(|m| o.value > m) {
                    return Some(RejectReason::Range);
                }
                if let (Some(step), Some(p)) = (rule.max_step, prev) {
                    if (o.value - p).abs() > step {
                        return Some(RejectReason::Step);
                    }
                }
                prev = Some(o.value);
                None
            })
            .collect()
    }
}
