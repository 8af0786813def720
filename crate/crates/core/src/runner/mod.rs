//! Experiment orchestration: configuration, the training loop in its
//! decentralized, centralized and local forms, scoring and log output.

mod config;
mod output;
mod train;

pub use config::{
    AggregationConfig, CentralObjective, CircuitConfig, DataConfig, DataSource, ExperimentConfig, NetworkConfig,
    NoiseConfig, NoiseKind, OutputConfig, TrainConfig,
};
pub use output::{
    format_report, read_rounds, read_scores, report_dirs, write_outputs, write_rounds, ScoresFile, GRAM_FILE,
    ROUNDS_FILE, SCORES_FILE,
};
pub use train::{
    evaluate_scores, iteration_to_threshold, run, run_centralized, run_centralized_on, run_decentralized,
    run_decentralized_on, run_local, run_local_on, EvalRecord, Mode, NodeScore, NodeState, Problem, RoundLog,
    RunLogs, RunResult, DEFAULT_METRIC,
};
