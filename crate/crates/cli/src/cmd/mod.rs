pub mod backtest;
pub mod compact;
pub mod features;
pub mod ingest;
pub mod scenario;
pub mod serve;
pub mod train;
