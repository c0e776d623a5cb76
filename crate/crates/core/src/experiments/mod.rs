//! Datasets, metrics and the studies built on them.

mod baselines;
mod dataset;
mod metrics;
mod report;
mod testset;

pub use baselines::{persistence_baseline, GroundTruth, Persistence};
pub use dataset::{
    build_train_dataset, decode_dataset, encode_dataset, read_dataset, write_dataset, TrainGrid,
    TrajectoryRecords, DATASET_MAGIC, DATASET_VERSION,
};
pub use metrics::{
    benchmark_intervals, epsilon_grid, proposed_intervals, sequence_accuracy, stepwise_nmse,
    threshold_sweep, AcceptanceInterval, Method, SweepResult,
};
pub use report::{write_accuracy_csv, write_nmse_csv, write_sweep_csv, AccuracyRow, NmseRow, SweepRow};
pub use testset::{build_test_sequences, TestSequence, POST_ATTACK_PACKETS};
