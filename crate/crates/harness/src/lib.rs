//! Experiment harness for `complabel`: declarative experiment specs, the
//! train/estimate pipelines, verification suites and learning curves.

pub mod config;
pub mod experiment;
pub mod curve;
pub mod verify;
pub mod table;
