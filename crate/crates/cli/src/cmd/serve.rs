use std::sync::Arc;
use std::time::Instant;

use chrono::{DateTime, Utc};
use twin_api::{serve, spawn_reloader, ServeState};
use twin_core::time::Span;

use crate::error::{CliError, CliResult};
use crate::Ctx;

pub struct ServeArgs {
    pub addr: String,
    pub reload_every: Span,
    /// Virtual start time; the clock then advances in real time from it.
    pub now: Option<DateTime<Utc>>,
}

pub fn run(ctx: &Ctx, args: ServeArgs) -> CliResult<()> {
    if args.reload_every.as_secs() <= 0 {
        return Err(CliError::usage("--reload-every must be positive"));
    }
    let started = Instant::now();
    let base = args.now;
    let clock = move || match base {
        Some(t) => t + chrono::Duration::from_std(started.elapsed()).unwrap_or_default(),
        None => Utc::now(),
    };
    let state = Arc::new(ServeState::open(ctx.root.clone(), clock())?);
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&args.addr)
            .await
            .map_err(|e| CliError::usage(format!("cannot bind {}: {e}", args.addr)))?;
        let local = listener.local_addr()?;
        println!("listening on http://{local}");
        let every = std::time::Duration::from_secs(args.reload_every.as_secs() as u64);
        spawn_reloader(state.clone(), every, clock);
        serve(listener, state).await?;
        Ok(())
    })
}
