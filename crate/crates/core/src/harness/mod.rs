//! Training, robustness sweeps, reports and the command line front end.

pub mod cli;
mod config;
mod eval;
mod optim;
mod report;
mod train;

pub use config::{CorruptionAugment, OptimizerConfig, OptimizerKind, TrainConfig, CONFIG_SCHEMA_VERSION};
pub use eval::{
    evaluate_sweep, evaluate_sweep_files, evaluate_tiles, predict_tile, sweep_spec, RobustnessReport, SweepIds,
};
pub use optim::Optimizer;
pub use report::{
    curves_csv, emit_report, load_report, ComparisonTable, DegreeScores, MethodScores, CURVES_CSV, MEAN_F1_PLOT,
    OA_PLOT, REPORT_JSON,
};
pub use train::{
    sample_batch, sample_patch, train, train_on_dataset, Batch, TrainHistory, TrainOutcome, ValidationRecord,
    FINAL_CHECKPOINT, HISTORY_FILE, LAST_GOOD_CHECKPOINT,
};
