//! File formats, report generation and command implementations for the
//! `iwknn` positioning tool.

pub mod commands;
pub mod config;
pub mod report;
pub mod store;
