//! End-to-end orchestration: config, file formats, preprocessing,
//! stratified splitting and the experiment driver behind the CLI.

pub mod config;
pub mod experiment;
pub mod io;
pub mod pipeline;
pub mod split;

pub use config::{PipelineConfig, WindowKind};
pub use experiment::{run_experiment, run_on_features, ExperimentOutcome};
pub use pipeline::{preprocess, SampleTriple};
pub use split::split;
