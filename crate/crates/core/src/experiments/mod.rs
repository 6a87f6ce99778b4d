//! Config-driven experiments: the full pipeline, the scalar example and the
//! batch-reactor Monte-Carlo study.

pub mod config;
pub mod io;
pub mod pipeline;
pub mod reactor;
pub mod scalar;

pub use config::ExperimentConfig;
pub use pipeline::{deploy, prepare_experiment, run_pipeline, run_pipeline_with, Experiment, write_artifacts, PipelineOutput, RunRecord};
pub use reactor::{run_batch_reactor_study, write_study, StudyResult};
pub use scalar::{run_scalar_example, write_scalar_report, ScalarReport};
