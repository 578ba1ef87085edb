//! Feature files, run configuration, reports and the command line.

pub mod cli;
pub mod config;
pub mod format;
pub mod report;
