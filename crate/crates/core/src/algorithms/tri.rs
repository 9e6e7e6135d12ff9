//! Tri-BBAI and the Stage I-III machinery it shares with Opt-BBAI.

use crate::error::{BaiError, Result};
use crate::family::{BanditInstance, RewardFamily};
use crate::harness::BatchedEnv;
use crate::oracle::solve_allocation;
use crate::stopping::min_z;

use super::elimination::{elimination_round, EliminationState, RoundOutcome};
use super::{RunDiagnostics, RunResult, StopReason, TriParams};

/// Stage II pull targets for one perturbed mean vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Targets {
    /// `ceil(min(alpha w*_i T* ln(1/delta), L2))` per arm.
    pub targets: Vec<u64>,
    pub weights: Vec<f64>,
    pub characteristic_time: f64,
}

/// Per-arm targets `ceil(min(alpha w*_i(b) T*(b) ln(1/delta), L2))`.
///
/// Fails when `b` has no unique maximizer or leaves the family interior; callers then
/// fall back to `L2` for every arm.
pub fn stage2_targets(
    family: RewardFamily,
    perturbed: &[f64],
    delta: f64,
    alpha: f64,
    l2: u64,
) -> Result<Stage2Targets> {
    let instance = BanditInstance::new(family, perturbed.to_vec())?;
    let solution = solve_allocation(&instance)?;
    let scale = alpha * solution.characteristic_time * (1.0 / delta).ln();
    let targets = solution
        .weights
        .iter()
        .map(|w| (w * scale).min(l2 as f64).ceil() as u64)
        .collect();
    Ok(Stage2Targets {
        targets,
        weights: solution.weights,
        characteristic_time: solution.characteristic_time,
    })
}

pub(crate) enum Exploration {
    Identified(usize),
    Continue,
}

/// Stages I-III. Identical for both batched algorithms.
pub(crate) fn explore(
    env: &mut BatchedEnv,
    params: &TriParams,
    diagnostics: &mut RunDiagnostics,
) -> Result<Exploration> {
    let n = env.num_arms();
    let family = env.instance().family();

    // Stage I
    env.issue_batch(&vec![params.l1; n])?;

    // Stage II: T_i^0 = L1 and w*(b^0) uniform.
    let mut issued = vec![params.l1; n];
    let mut previous_weights = vec![1.0 / n as f64; n];
    let stability = 1.0 / (n as f64).sqrt();
    for round in 1..=params.max_stage2_rounds {
        diagnostics.stage2_rounds = round;
        let stats = env.stats();
        let leader = stats.leader()?;
        let perturbed: Vec<f64> = (0..n)
            .map(|i| {
                let m = stats.mean(i);
                if i == leader {
                    m - params.epsilon
                } else {
                    m + params.epsilon
                }
            })
            .collect();
        let (targets, weights) =
            match stage2_targets(family, &perturbed, params.delta, params.alpha, params.l2) {
                Ok(t) => (t.targets, t.weights),
                Err(_) => (vec![params.l2; n], vec![1.0 / n as f64; n]),
            };
        let increments: Vec<u64> = targets
            .iter()
            .zip(&issued)
            .map(|(&target, &done)| target.saturating_sub(done))
            .collect();
        for (done, &target) in issued.iter_mut().zip(&targets) {
            *done = (*done).max(target);
        }
        env.issue_batch(&increments)?;

        let stable = weights
            .iter()
            .zip(&previous_weights)
            .all(|(w, prev)| (w - prev).abs() <= stability);
        if stable {
            break;
        }
        previous_weights = weights;
    }

    // Stage III: pure computation on the revealed samples.
    let tau = env.total_pulls();
    diagnostics.tau = tau;
    let (leader, z) = min_z(family, env.stats())?;
    if z >= params.threshold.value(tau, params.delta)? {
        Ok(Exploration::Identified(leader))
    } else {
        Ok(Exploration::Continue)
    }
}

fn check_arms(env: &BatchedEnv) -> Result<()> {
    if env.num_arms() < 2 {
        return Err(BaiError::Precondition("need at least 2 arms".into()));
    }
    Ok(())
}

/// Three-batch best arm identification.
///
/// Stage IV tops every arm up to `L3` total pulls in a single batch and returns the
/// empirical leader.
pub fn tri_bbai(env: &mut BatchedEnv, params: &TriParams) -> Result<RunResult> {
    check_arms(env)?;
    let mut diagnostics = RunDiagnostics::default();
    if let Exploration::Identified(arm) = explore(env, params, &mut diagnostics)? {
        return Ok(RunResult::finish(env, arm, StopReason::Stage3Chernoff, diagnostics));
    }
    let (samples, batches) = (env.total_pulls(), env.batch_count());
    let top_up: Vec<u64> = env
        .stats()
        .pulls()
        .iter()
        .map(|&done| params.l3.saturating_sub(done))
        .collect();
    env.issue_batch(&top_up)?;
    diagnostics.stage4_samples = env.total_pulls() - samples;
    diagnostics.stage4_batches = env.batch_count() - batches;
    let arm = env.stats().leader()?;
    Ok(RunResult::finish(env, arm, StopReason::Stage4TriArgmax, diagnostics))
}

/// Tri-BBAI with Stage IV replaced by successive elimination plus the best-arm
/// elimination check. Each while-loop round costs one batch.
///
/// Stage IV assumes rewards in [0, 1]; Gaussian instances error if they reach it.
pub fn opt_bbai(env: &mut BatchedEnv, params: &TriParams) -> Result<RunResult> {
    check_arms(env)?;
    let mut diagnostics = RunDiagnostics::default();
    if let Exploration::Identified(arm) = explore(env, params, &mut diagnostics)? {
        return Ok(RunResult::finish(env, arm, StopReason::Stage3Chernoff, diagnostics));
    }
    if env.instance().family() != RewardFamily::Bernoulli {
        return Err(BaiError::Capability(
            "Opt-BBAI's elimination stage needs rewards bounded in [0, 1]".into(),
        ));
    }
    let (samples, batches) = (env.total_pulls(), env.batch_count());
    let mut state = EliminationState::new(env.num_arms(), params.delta);
    let (arm, reason) = loop {
        if state.active().len() == 1 {
            break (state.active()[0], StopReason::Stage4OptElimination);
        }
        if let RoundOutcome::Fallback(arm) = elimination_round(env, &mut state)? {
            break (arm, StopReason::Stage4OptFallback);
        }
    };
    diagnostics.elimination_rounds = state.completed_rounds() as u64;
    diagnostics.stage4_samples = env.total_pulls() - samples;
    diagnostics.stage4_batches = env.batch_count() - batches;
    Ok(RunResult::finish(env, arm, reason, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;

    const B: RewardFamily = RewardFamily::Bernoulli;

    #[test]
    fn targets_reference_value() {
        let t = stage2_targets(B, &[0.6, 0.4], 1e-3, 1.001, u64::MAX).unwrap();
        assert_eq!(t.targets, vec![172, 172]);
    }

    #[test]
    fn targets_capped_by_l2() {
        let t = stage2_targets(B, &[0.6, 0.4, 0.3], 1e-3, 1.001, 5).unwrap();
        assert_eq!(t.targets, vec![5, 5, 5]);
    }

    #[test]
    fn symmetric_targets() {
        let t = stage2_targets(B, &[0.3, 0.7], 1e-2, 1.001, 10_000).unwrap();
        assert_eq!(t.targets[0], t.targets[1]);
    }

    #[test]
    fn degenerate_targets_error() {
        assert!(stage2_targets(B, &[0.6, 0.6, 0.4], 1e-3, 1.001, 9).is_err());
        assert!(stage2_targets(B, &[1.01, 0.4], 1e-3, 1.001, 9).is_err());
    }
}
