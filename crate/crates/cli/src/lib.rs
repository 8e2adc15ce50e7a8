//! Experiment harness for `signet-core`: TOML configuration, sweep
//! orchestration, resumable manifests, and CSV result tables.

pub mod config;
pub mod experiment;
pub mod manifest;
pub mod tables;
