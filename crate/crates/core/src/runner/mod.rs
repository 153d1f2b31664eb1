//! Pretraining, per-condition fine-tuning, and the condition × seed grid.

mod ablation;
mod config;
mod sampler;
mod train;

pub use ablation::{
    build_corpora, cell_dir, median, parse_results_csv, results_csv, run_ablation, seed_dir, threads_from_env,
    write_cell, write_provenance, AblationResults, CellResult, CellRun, ResultRow, RESULT_COLUMNS,
};
pub use config::{DESK_LR_SCALE, AnalysisConfig, EvalConfig, GridConfig, PretrainConfig, RunConfig};
pub use sampler::{batch_indices, MixtureSampler};
pub use train::{
    mean_loss, pretrain, pretrain_stage, run_condition, sampled_examples, Provenance, RunFailure,
    RunResult, StageSummary, StepRecord, TrainLog, ValRecord, CODE_VERSION,
};
