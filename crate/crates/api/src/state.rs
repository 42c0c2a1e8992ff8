use std::sync::{Arc, RwLock};
use std::time::Duration as StdDuration;

use chrono::{DateTime, Duration, Utc};
use tokio::task::JoinHandle;

use crate::layout::DataRoot;
use crate::snapshot::{BuildError, Snapshot};

/// Holds the published snapshot. Readers clone the `Arc` and keep using it
/// for the whole request; [`ServeState::reload`] builds a new snapshot off
/// to the side and swaps it in.
pub struct ServeState {
    root: DataRoot,
    current: RwLock<Arc<Snapshot>>,
}

impl ServeState {
    /// Builds the first snapshot. A failure here is returned, unlike
    /// later reloads.
    pub fn open(root: DataRoot, now: DateTime<Utc>) -> Result<Self, BuildError> {
        let first = Snapshot::build(&root, now)?;
        Ok(ServeState {
            root,
            current: RwLock::new(Arc::new(first)),
        })
    }

    pub fn root(&self) -> &DataRoot {
        &self.root
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().expect("snapshot lock").clone()
    }

    /// Builds and publishes a fresh snapshot. On failure the previous one
    /// stays in place and the error is logged and returned. `loaded_at`
    /// strictly increases even when `now` does not.
    pub fn reload(&self, now: DateTime<Utc>) -> Result<DateTime<Utc>, BuildError> {
        let built = match Snapshot::build(&self.root, now) {
            Ok(s) => s,
            Err(e) => {
                tracing::error!(error = %e, "snapshot reload failed; keeping previous snapshot");
                return Err(e);
            }
        };
        let mut slot = self.current.write().expect("snapshot lock");
        let floor = slot.loaded_at + Duration::microseconds(1);
        let at = if now > slot.loaded_at { now } else { floor };
        *slot = Arc::new(built.with_loaded_at(at));
        Ok(at)
    }
}

/// Reloads every `every` on a blocking thread, reading the instant from
/// `clock`.
pub fn spawn_reloader<C>(state: Arc<ServeState>, every: StdDuration, clock: C) -> JoinHandle<()>
where
    C: Fn() -> DateTime<Utc> + Send + Sync + 'static,
{
    let clock = Arc::new(clock);
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(every);
        tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        tick.tick().await;
        loop {
            tick.tick().await;
            let (state, clock) = (state.clone(), clock.clone());
            let _ = tokio::task::spawn_blocking(move || state.reload(clock())).await;
        }
    })
}
