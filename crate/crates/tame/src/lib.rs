//! Experiment runner for `tame-core`: dataset ingestion (CIFAR-100 binary,
//! synthetic archetypes, `TAMETASK` containers), `TAMECKPT` checkpoints,
//! flat key=value experiment specs, JSON-lines events and CSV reports.

pub mod cifar;
pub mod commands;
pub mod config;
pub mod container;
pub mod dataset;
pub mod error;
pub mod fsutil;
pub mod manifest;
pub mod report;

pub use error::{Error, Result};
