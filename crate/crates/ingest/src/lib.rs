//! Data collection following the mediator-wrapper pattern.
//!
//! Each source is wrapped by a [`SourceAdapter`] that returns records in
//! the source's own vocabulary (field names, decimal conventions, time
//! strings). [`poll_and_normalize`] is the mediator side: it maps fields to
//! catalog series, parses values, and produces [`Observation`]s plus a list
//! of rejects with reasons. The [`schedule`] module drives polling from
//! cron-style entries against an injectable clock, and [`IngestPipeline`]
//! glues polling to the window store and weekly compaction.
//!
//! Live institutions are stood in for by [`fixture`] replay and the
//! [`synthetic`] generator; [`http`] is a generic JSON pull adapter.
//!
//! [`Observation`]: twin_core::Observation

pub mod adapter;
pub mod config;
pub mod error;
pub mod fixture;
pub mod http;
pub mod pipeline;
pub mod schedule;
pub mod synthetic;

pub use adapter::{poll_and_normalize, FieldMapping, FieldSpec, Normalized, RawBatch, RawRecord, Reject, SourceAdapter};
pub use error::{IngestError, Result};
pub use fixture::{replay_fixture, FixtureAdapter};
pub use pipeline::{week_start, IngestPipeline, IngestTotals, RefreshReport};
pub use schedule::{run_schedule, validate_entries, Clock, JobKind, ScheduleEntry, SystemClock, TraceEntry, VirtualClock};
pub use synthetic::{synthesize, SyntheticAdapter, SyntheticSpec, SyntheticVariable};
