//! Cross-validated evaluation of the pipelines, reports and the paired
//! t-test used to compare them.

mod cv;
mod manifest;
mod metrics;
mod suite;
mod ttest;

pub use cv::{
    config_fingerprint, cross_validate, cross_validate_with, fit_pipeline, CvOptions, EvalReport, FittedPipeline,
    PipelineKind, PipelineSpec, Protocol,
};
pub use manifest::{DatasetEntry, Manifest, PipelineEntry};
pub use metrics::{accuracy, confusion_matrix, trace};
pub use suite::{
    render_tables, run_experiment_suite, run_experiment_suite_with, CellOutcome, PipelineSummary, ReportBundle, TTestEntry,
};
pub use ttest::{paired_ttest, student_t_two_tailed, TTestResult};
