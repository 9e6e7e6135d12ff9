//! Fully sequential Track-and-Stop baseline.

use crate::error::{BaiError, Result};
use crate::family::BanditInstance;
use crate::harness::BatchedEnv;
use crate::oracle::solve_allocation;
use crate::stopping::{min_z, tas_beta_threshold};

use super::{RunDiagnostics, RunResult, StopReason};

/// Track-and-Stop with direct tracking and `sqrt(t)` forced exploration.
///
/// Every pull is its own batch. After one pull per arm, each step first tests
/// `min_j Z_j(t) >= ln((ln t + 1) / delta)`; otherwise it pulls an arm with
/// `N_i < sqrt(t) - n/2` if any (fewest pulls first), or else
/// `argmax_i t w*_i(mu_hat) - N_i`. When `w*(mu_hat)` is undefined (tied or boundary
/// empirical means) the least-pulled arm is taken instead.
pub fn track_and_stop(env: &mut BatchedEnv, delta: f64) -> Result<RunResult> {
    let n = env.num_arms();
    if n < 2 {
        return Err(BaiError::Precondition("need at least 2 arms".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BaiError::Domain(format!("delta = {delta} outside (0, 1)")));
    }
    let family = env.instance().family();
    let mut counts = vec![0u64; n];
    for arm in 0..n {
        counts[arm] = 1;
        env.issue_batch(&counts)?;
        counts[arm] = 0;
    }

    loop {
        let stats = env.stats();
        let t = stats.total();
        let (leader, z) = min_z(family, stats)?;
        if z >= tas_beta_threshold(t, delta)? {
            return Ok(RunResult::finish(
                env,
                leader,
                StopReason::BaselineStop,
                RunDiagnostics::default(),
            ));
        }

        let pulls = stats.pulls();
        let least_pulled = (0..n).min_by_key(|&i| (pulls[i], i)).unwrap_or(0);
        let forced_floor = (t as f64).sqrt() - n as f64 / 2.0;
        let arm = if (pulls[least_pulled] as f64) < forced_floor {
            least_pulled
        } else {
            let tracked = BanditInstance::new(family, stats.means())
                .and_then(|inst| solve_allocation(&inst));
            match tracked {
                Ok(solution) => {
                    let mut best = 0;
                    let mut best_lag = f64::NEG_INFINITY;
                    for (i, w) in solution.weights.iter().enumerate() {
                        let lag = t as f64 * w - pulls[i] as f64;
                        if lag > best_lag {
                            best = i;
                            best_lag = lag;
                        }
                    }
                    best
                }
                Err(_) => least_pulled,
            }
        };
        counts[arm] = 1;
        env.issue_batch(&counts)?;
        counts[arm] = 0;
    }
}
