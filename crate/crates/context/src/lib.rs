//! Context entities in the NGSI-LD `keyValues` shape, kept in process.
//!
//! [`ContextStore`] holds the current state of each entity plus an
//! append-only history per attribute, answers type and geo-near queries by
//! linear scan, and persists one JSON document per entity. Observations
//! from the ingest path become temporal points on `Device` entities through
//! [`wrap_observations`].

pub mod entity;
pub mod error;
pub mod fixtures;
pub mod geo;
pub mod store;
pub mod wrap;

pub use entity::{ContextEntity, URN_PREFIX};
pub use error::{ContextError, Result};
pub use geo::{haversine_m, GeoPoint, EARTH_RADIUS_M};
pub use store::{ContextStore, DanglingRelationship, EntityFilter, TimedValue};
pub use wrap::{device_id, wrap_observations};
