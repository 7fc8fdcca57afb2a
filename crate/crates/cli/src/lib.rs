//! Experiment orchestration for the harmonic tube approximation: JSON
//! configuration, the per-level build/measure pipeline, and report output.

pub mod config;
pub mod pipeline;
