//! Cross-validated evaluation of the semi-supervised pipeline.

mod experiment;
mod folds;
mod metrics;
mod pipeline;

pub use experiment::{run_experiment, write_report, ConfigOutcome, ExperimentReport, RunManifest};
pub use folds::{kfold_split, train_indices};
pub use metrics::{compute_metrics, Metrics, Summary};
pub use pipeline::{train_semisupervised, ExperimentConfig, ExtractorCache, ExtractorChoice, Selector, TrainedPipeline};
