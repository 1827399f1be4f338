//! Configuration, experiment registry and persistence for mrelab runs.

pub mod config;
pub mod experiments;
pub mod manifest;
