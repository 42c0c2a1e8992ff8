//! Shared vocabulary of the lagoon digital twin.
//!
//! Every other crate in the workspace speaks in terms of the types defined
//! here: [`SeriesKey`] identifies a variable measured at a station,
//! [`Observation`] is one reading of it, and the [`Catalog`] records which
//! sources exist and how their variables aggregate. The two error metrics
//! ([`mae`] and [`cvrmse`]) are used by every report in the platform.
//!
//! Numeric routines are generic over [`Scalar`] so they run on `f32` and
//! `f64` alike; the `*_f64` aliases below pin the common case.

pub mod catalog;
pub mod error;
pub mod metrics;
pub mod resample;
pub mod scalar;
pub mod time;
pub mod types;

pub use catalog::{Catalog, DatasetDescriptor, VariableSpec};
pub use error::{CoreError, Result};
pub use metrics::{cvrmse, mae, rmse, MetricReport};
pub use resample::resample;
pub use scalar::Scalar;
pub use types::{Aggregation, Observation, Quality, SeriesKey, StationMeta};

/// Metric report in double precision, the precision used by all stored data.
pub type MetricReportF64 = MetricReport<f64>;
/// Metric report in single precision.
pub type MetricReportF32 = MetricReport<f32>;
