//! Command-line layer for the eldercare toolkit: scenario runs, budget
//! optimization, gap filling, detection and market survey reports.
//!
//! Every command is available as a plain function so it can be driven from
//! tests without spawning a process.

pub mod app;
pub mod commands;
pub mod error;
pub mod io;
pub mod market;
pub mod report;

pub use app::{run, Cli, Format, OUT_DIR_ENV};
pub use error::CliError;
pub use market::{market_report, MarketFixture, MarketReport};
pub use report::RunReport;
