//! HTTP service over the stores and models.
//!
//! Handlers never touch the data root directly except for `/history`.
//! Everything else reads one [`Snapshot`] that [`ServeState`] swaps on
//! reload. Each response carries the snapshot instant in the
//! `x-snapshot-loaded-at` header. Endpoints are listed in `docs/api.md`.

pub mod error;
pub mod fixture;
pub mod layout;
pub mod registry;
pub mod routes;
pub mod snapshot;
pub mod state;

pub use error::ApiError;
pub use layout::DataRoot;
pub use registry::{HorizonScore, ModelEntry, Registry, RegistryError};
pub use routes::{evaluate_scenario, format_instant, router, SNAPSHOT_HEADER};
pub use snapshot::{BuildError, Snapshot, STALE_AFTER};
pub use state::{spawn_reloader, ServeState};

use std::sync::Arc;

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<ServeState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
