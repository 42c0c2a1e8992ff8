//! `twin`: ingest, compact, train, backtest, serve and query the lagoon twin.

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand};
use twin_api::DataRoot;
use twin_core::time::{parse_rfc3339, Span};

mod cmd;
mod data;
mod error;

use cmd::backtest::ReportFormat;
use cmd::train::{ModelKind, PoolOptions, RegimeArg};
use error::CliResult;

pub struct Ctx {
    pub root: DataRoot,
    pub json: bool,
}

#[derive(Parser)]
#[command(name = "twin", version, about = "Lagoon digital twin: data, models and API")]
struct Cli {
    /// Directory holding the catalog, stores, context and models.
    #[arg(long, global = true, env = "TWIN_DATA_ROOT", default_value = "data")]
    data_root: PathBuf,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

fn instant(s: &str) -> Result<DateTime<Utc>, String> {
    parse_rfc3339(s).map_err(|e| e.to_string())
}

fn span(s: &str) -> Result<Span, String> {
    s.parse::<Span>().map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Run ingestion jobs from a sources file.
    Ingest {
        #[arg(long)]
        config: PathBuf,
        /// Schedule file; defaults to hourly refresh plus weekly compaction.
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Run every scheduled job once and exit (the default).
        #[arg(long, conflicts_with_all = ["follow", "virtual_clock"])]
        once: bool,
        /// Keep running on the wall clock.
        #[arg(long, conflicts_with = "virtual_clock")]
        follow: bool,
        /// Replay the schedule over `<span>` or `<start>+<span>`.
        #[arg(long)]
        virtual_clock: Option<String>,
        #[arg(long, value_parser = instant)]
        now: Option<DateTime<Utc>>,
    },
    /// Compact one ISO week (e.g. 2024-W23) into the historical store.
    Compact {
        #[arg(long)]
        week: String,
        #[arg(long, value_parser = instant)]
        now: Option<DateTime<Utc>>,
    },
    /// Train a pooled model or an LSTM runoff model and register it.
    Train {
        /// `source/station/variable`.
        #[arg(long)]
        target: String,
        #[arg(long, value_enum)]
        model: Option<ModelKind>,
        #[arg(long, default_value_t = 0)]
        search_budget: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value = "hourly")]
        regime: RegimeArg,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        /// LSTM horizons in hours.
        #[arg(long, value_delimiter = ',', default_value = "1,6,24")]
        horizons: Vec<usize>,
        #[arg(long, default_value_t = 32)]
        hidden: usize,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        /// LSTM input window in hours.
        #[arg(long, default_value_t = 24)]
        window: usize,
        #[arg(long, value_parser = instant)]
        now: Option<DateTime<Utc>>,
    },
    /// Backtest candidates without saving anything.
    Backtest {
        #[arg(long)]
        target: Vec<String>,
        #[arg(long, value_enum)]
        model: Option<ModelKind>,
        #[arg(long, default_value_t = 0)]
        search_budget: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value = "hourly")]
        regime: RegimeArg,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, value_enum, default_value = "table")]
        report: ReportFormat,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, value_parser = span, default_value = "1h")]
        reload_every: Span,
        /// Start the clock at this instant instead of the wall clock.
        #[arg(long, value_parser = instant)]
        now: Option<DateTime<Utc>>,
    },
    /// What-if streamflow run for one station.
    Scenario {
        #[arg(long)]
        station: String,
        #[arg(long)]
        horizon: usize,
        /// `variable=factor`, repeatable.
        #[arg(long)]
        multiply: Vec<String>,
        /// `variable=value`, repeatable.
        #[arg(long)]
        offset: Vec<String>,
        /// Ask a running server instead of loading models locally.
        #[arg(long)]
        server: Option<String>,
        #[arg(long, value_parser = instant)]
        now: Option<DateTime<Utc>>,
    },
    /// Feature matrix tools.
    Features {
        #[command(subcommand)]
        command: FeaturesCommand,
    },
}

#[derive(Subcommand)]
enum FeaturesCommand {
    /// Write the lag matrix for a target's pool as tab-separated text.
    Dump {
        #[arg(long)]
        target: String,
        #[arg(long, value_enum, default_value = "hourly")]
        regime: RegimeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let ctx = Ctx {
        root: DataRoot::new(&cli.data_root),
        json: cli.json,
    };
    match cli.command {
        Command::Ingest {
            config,
            schedule,
            once: _,
            follow,
            virtual_clock,
            now,
        } => cmd::ingest::run(
            &ctx,
            cmd::ingest::IngestArgs {
                config,
                schedule,
                follow,
                virtual_clock,
                now,
            },
        ),
        Command::Compact { week, now } => cmd::compact::run(&ctx, &week, now),
        Command::Train {
            target,
            model,
            search_budget,
            seed,
            regime,
            stride,
            horizons,
            hidden,
            epochs,
            window,
            now,
        } => cmd::train::run(
            &ctx,
            cmd::train::TrainArgs {
                target,
                pool: PoolOptions {
                    model,
                    regime: regime.into(),
                    search_budget,
                    seed,
                    stride,
                },
                horizons,
                hidden,
                epochs,
                window,
                now,
            },
        ),
        Command::Backtest {
            target,
            model,
            search_budget,
            seed,
            regime,
            stride,
            report,
        } => {
            let opts = PoolOptions {
                model,
                regime: regime.into(),
                search_budget,
                seed,
                stride,
            };
            cmd::backtest::run(&ctx, &target, &opts, report)
        }
        Command::Serve { addr, reload_every, now } => cmd::serve::run(
            &ctx,
            cmd::serve::ServeArgs {
                addr,
                reload_every,
                now,
            },
        ),
        Command::Scenario {
            station,
            horizon,
            multiply,
            offset,
            server,
            now,
        } => cmd::scenario::run(
            &ctx,
            cmd::scenario::ScenarioArgs {
                station,
                horizon,
                multiply,
                offset,
                server,
                now,
            },
        ),
        Command::Features {
            command: FeaturesCommand::Dump { target, regime, out },
        } => cmd::features::dump(&ctx, &target, regime.into(), out),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.exit_code()
        }
    }
}
