//! Batch front end: run configuration, the analysis pipeline and report
//! output for the `levicore` binary.

pub mod config;
pub mod output;
pub mod pipeline;
