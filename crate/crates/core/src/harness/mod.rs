//! Experiment orchestration: instance generation, method runs, threshold
//! tuning over train/test splits and report serialization.

mod audit;
mod config;
mod experiment;
pub mod metrics;

use thiserror::Error;

pub use audit::{likelihood_score_audit, ScoreAudit};
pub use config::{BootstrapConfig, ExperimentConfig, GraphFamily, KGrid, Method, UnknownPolicy};
pub use experiment::{
    run_experiment, stream_rng, ExperimentOutput, ExperimentReport, InstanceRow, MethodPredictions, MethodSummary,
    MethodTiming,
    Stream,
};
pub use metrics::{
    default_threshold_grid, metric_accuracy, metric_auc, metric_f1, select_grid_index, tune_and_score,
    InstancePredictions, Metric, TuneReport,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("score: {0}")]
    Score(#[from] crate::scores::ScoreError),
    #[error("graph generation: {0}")]
    Generator(#[from] crate::generators::GeneratorError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("covariance selection: {0}")]
    Covsel(#[from] crate::covsel::CovselError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
