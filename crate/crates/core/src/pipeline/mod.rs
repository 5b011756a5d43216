//! Datasets, configuration and experiment orchestration.

mod config;
mod dataset;
mod experiment;
mod report;

pub use config::{ExperimentConfig, MixingKind};
pub use dataset::{load_feature_dataset, load_recording, write_feature_dataset, write_recording, DatasetRow, FeatureDataset};
pub use experiment::{evaluate, run_experiment, synthetic_datasets, Evaluation, ExperimentReport, ModelSummary, SizeResult};
pub use report::{render_decode_csv, render_summary_csv, render_text};
