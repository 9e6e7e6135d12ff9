//! Identification strategies run against a [`BatchedEnv`](crate::harness::BatchedEnv).

mod elimination;
mod params;
mod tas;
mod tri;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::BaiError;
use crate::harness::BatchedEnv;

pub use elimination::{
    check_best_arm_elimination, elimination_round, successive_elim_round, EliminationRound,
    EliminationState, RoundOutcome,
};
pub use params::{TriParams, EXPERIMENT_EPSILON};
pub use tas::track_and_stop;
pub use tri::{opt_bbai, stage2_targets, tri_bbai, Stage2Targets};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StopReason {
    Stage3Chernoff,
    Stage4TriArgmax,
    Stage4OptElimination,
    Stage4OptFallback,
    BaselineStop,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StopReason::Stage3Chernoff => "stage3_chernoff",
            StopReason::Stage4TriArgmax => "stage4_tri_argmax",
            StopReason::Stage4OptElimination => "stage4_opt_elimination",
            StopReason::Stage4OptFallback => "stage4_opt_fallback",
            StopReason::BaselineStop => "baseline_stop",
        };
        f.write_str(s)
    }
}

impl FromStr for StopReason {
    type Err = BaiError;

    fn from_str(s: &str) -> Result<Self, BaiError> {
        Ok(match s {
            "stage3_chernoff" => StopReason::Stage3Chernoff,
            "stage4_tri_argmax" => StopReason::Stage4TriArgmax,
            "stage4_opt_elimination" => StopReason::Stage4OptElimination,
            "stage4_opt_fallback" => StopReason::Stage4OptFallback,
            "baseline_stop" => StopReason::BaselineStop,
            other => return Err(BaiError::Config(format!("unknown stop reason `{other}`"))),
        })
    }
}

/// Where the pulls of a run went.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    /// Total pulls when Stage III ran (`tau`); 0 for the baseline.
    pub tau: u64,
    /// Stage II rounds executed, including the one that broke out.
    pub stage2_rounds: u64,
    /// Pulls issued after Stage III.
    pub stage4_samples: u64,
    pub stage4_batches: u64,
    /// While-loop rounds of Opt-BBAI's Stage IV.
    pub elimination_rounds: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub returned_arm: usize,
    /// Sample complexity `N_delta`.
    pub samples: u64,
    pub batches: u64,
    pub stop_reason: StopReason,
    /// Whether `returned_arm` is the instance's true best arm.
    pub correct: bool,
    pub diagnostics: RunDiagnostics,
}

impl RunResult {
    pub(crate) fn finish(
        env: &BatchedEnv,
        returned_arm: usize,
        stop_reason: StopReason,
        diagnostics: RunDiagnostics,
    ) -> Self {
        RunResult {
            returned_arm,
            samples: env.total_pulls(),
            batches: env.batch_count(),
            stop_reason,
            correct: returned_arm == env.instance().argmax(),
            diagnostics,
        }
    }
}
