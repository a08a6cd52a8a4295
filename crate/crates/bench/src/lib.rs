//! Experiment harness for `gausscbo`: benchmark targets, multi-seed runs,
//! quantile reports and CSV/JSON output.

pub mod config;
pub mod experiment;
pub mod output;
pub mod stats;
pub mod targets;
pub mod validate;
