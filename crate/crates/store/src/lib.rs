//! Two-stage persistence.
//!
//! Real-time data lands in the [`WindowStore`], an append-only text log per
//! series that only ever holds the last seven days. Once a week,
//! [`compact`] validates the week's records and moves the survivors into
//! the [`HistoricalStore`], a set of immutable columnar segment files
//! (layout in [`segment`]) indexed by series and time range.

pub mod compact;
pub mod error;
pub mod historical;
pub mod segment;
pub mod validation;
pub mod window;

pub use compact::{compact, storage_report, CompactionReport, Rejection, StorageReport};
pub use error::{Result, StoreError};
pub use historical::{HistoricalStore, SegmentMeta};
pub use segment::SegmentRecord;
pub use validation::{RejectReason, ValidationRule, ValidationRules};
pub use window::{AppendReport, WindowStore, RETENTION};
