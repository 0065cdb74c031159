//! Evaluation protocol: splits, ranking metrics and experiment tables.

pub mod experiment;
pub mod metrics;
pub mod split;

pub use experiment::{
    reconstruction_baseline_score, run_experiment, CellResult, CellScores, DataSource, DatasetSpec,
    ExperimentConfig, ExperimentOutput, Method, ResultRow, ResultsTable,
};
pub use metrics::{auc, average_precision};
pub use split::{build_split, Split, SplitSpec};
