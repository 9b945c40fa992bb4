//! Experiment orchestration: configs, model specs, grid runs, metrics and
//! report rendering.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod model_spec;
pub mod report;
