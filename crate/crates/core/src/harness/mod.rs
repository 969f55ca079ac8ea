//! Experiment configuration, dispatch and serialization.

pub mod config;
pub mod emit;
pub mod run;

pub use config::{Experiment, ExperimentConfig, ExperimentKind, SCHEMA_VERSION};
pub use emit::{emit, parse_formats, Format};
pub use run::{run, Payload, RunRecord};
