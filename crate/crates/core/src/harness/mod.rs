//! Batched environment, instance generators and the experiment runner.

mod env;
mod experiment;
mod instances;

pub use env::{BatchOutcome, BatchedEnv, Pull, DEFAULT_PULL_CAP};
pub use experiment::{
    read_csv, run_experiment, run_trial, run_trial_in, run_trials, summarize, trial_instance, trial_seed,
    write_csv, write_results, Algorithm, ExperimentConfig, ParamProfile, SummaryRow,
    TrialRecord, TrialRun, TrialSettings, ABORTED, SUMMARY_FILE, TRIALS_FILE,
};
pub use instances::{make_instance, GeneratedInstance, InstanceSpec};
