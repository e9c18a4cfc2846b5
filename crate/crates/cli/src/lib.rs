//! Scenario runner: configuration, scenario table and report writers behind
//! the `heatball-lab` binary.

pub mod config;
pub mod error;
pub mod report;
pub mod scenarios;
