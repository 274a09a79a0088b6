//! Experiment driver for BBM two-soliton collisions: configuration, run planning,
//! orchestration, artifacts and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod experiment;
pub mod pipeline;
pub mod plan;
pub mod report;
pub mod tolerances;
