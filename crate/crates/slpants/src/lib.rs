//! Files, reports and the command line for `slpants-core`.
//!
//! A run is driven by a TOML [`config::RunConfig`]. The [`pipeline`] turns it
//! into a solve, post-solve verification, decay-rate comparison and topology
//! classification; [`io`] reads and writes solution and mesh files and
//! [`report`] defines `report.json`.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod threads;

pub use error::{exit, CliError};
pub use slpants_core as core;
