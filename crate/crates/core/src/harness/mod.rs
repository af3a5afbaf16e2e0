//! Experiment orchestration: configuration, seeded replications, the trial
//! loop, regret and communication accounting, and result files.

mod config;
mod output;
mod run;

pub use config::{
    Budget, EnvironmentConfig, ExperimentConfig, PanelConfig, PanelSource, PolicyKind,
    SyntheticConfig, TuningConfig,
};
pub use output::{
    emit_results, git_describe, manifest, read_results_csv, summarize, write_results_csv,
    Manifest, SummaryRow, FAILURES_FILE, MANIFEST_FILE, RESULTS_FILE, RESULTS_HEADER,
    SUMMARY_FILE,
};
pub use run::{
    build_environment, build_policy, keep_trial, mean_sd, play_round, regret_oracle,
    run_experiment, run_replication, with_alpha, ExperimentResult, Failure, RepResult,
    ResultRow, RoundRecord, TunedAlpha,
};
