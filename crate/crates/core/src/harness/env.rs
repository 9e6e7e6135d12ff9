use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BaiError, Result};
use crate::family::BanditInstance;
use crate::stopping::ArmStats;

/// Default per-trial pull cap; pathological configurations abort instead of hanging.
pub const DEFAULT_PULL_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pull {
    pub arm: u32,
    pub reward: f64,
}

/// Per-arm totals of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    pub counts: Vec<u64>,
    pub sums: Vec<f64>,
}

impl BatchOutcome {
    /// Mean reward of `arm` within this batch; `NaN` if it was not pulled.
    pub fn mean(&self, arm: usize) -> f64 {
        if self.counts[arm] == 0 {
            f64::NAN
        } else {
            self.sums[arm] / self.counts[arm] as f64
        }
    }
}

/// A simulated bandit whose rewards are revealed one batch at a time.
///
/// Rewards inside a batch are drawn arm by arm in index order, then pull by pull, so a
/// seed and a sequence of batch requests fully determine the pull log.
#[derive(Debug, Clone)]
pub struct BatchedEnv {
    instance: BanditInstance,
    stats: ArmStats,
    pull_log: Option<Vec<Pull>>,
    batch_count: u64,
    pull_cap: Option<u64>,
    force_best_elimination: bool,
    rng: ChaCha8Rng,
}

impl BatchedEnv {
    pub fn new(instance: BanditInstance, seed: u64) -> Self {
        let n = instance.num_arms();
        BatchedEnv {
            instance,
            stats: ArmStats::new(n),
            pull_log: None,
            batch_count: 0,
            pull_cap: Some(DEFAULT_PULL_CAP),
            force_best_elimination: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn with_pull_cap(mut self, cap: Option<u64>) -> Self {
        self.pull_cap = cap;
        self
    }

    /// Keep every `(arm, reward)` pair. Off by default; elimination rounds can issue
    /// millions of pulls.
    pub fn with_pull_log(mut self) -> Self {
        self.pull_log = Some(Vec::new());
        self
    }

    /// Test instrumentation: Opt-BBAI drops the true best arm after its first
    /// elimination round regardless of the observations.
    pub fn with_forced_best_elimination(mut self, on: bool) -> Self {
        self.force_best_elimination = on;
        self
    }

    pub fn instance(&self) -> &BanditInstance {
        &self.instance
    }

    pub fn num_arms(&self) -> usize {
        self.instance.num_arms()
    }

    pub fn stats(&self) -> &ArmStats {
        &self.stats
    }

    pub fn batch_count(&self) -> u64 {
        self.batch_count
    }

    pub fn total_pulls(&self) -> u64 {
        self.stats.total()
    }

    pub fn pull_log(&self) -> Option<&[Pull]> {
        self.pull_log.as_deref()
    }

    /// The arm the forced-elimination hook removes, if the hook is on.
    pub fn forced_elimination_target(&self) -> Option<usize> {
        self.force_best_elimination.then(|| self.instance.argmax())
    }

    /// Uniform draw from `0..len` on the trial's stream.
    pub fn choose_index(&mut self, len: usize) -> usize {
        self.rng.gen_range(0..len)
    }

    /// Pulls arm `i` `counts[i]` times. Counts as one batch iff at least one pull is issued.
    pub fn issue_batch(&mut self, counts: &[u64]) -> Result<BatchOutcome> {
        let n = self.num_arms();
        if counts.len() != n {
            return Err(BaiError::Precondition(format!(
                "batch has {} counts for {n} arms",
                counts.len()
            )));
        }
        let requested: u64 = counts.iter().sum();
        let samples = self.total_pulls();
        if let Some(cap) = self.pull_cap {
            if samples.saturating_add(requested) > cap {
                return Err(BaiError::Exhausted {
                    cap,
                    samples,
                    batches: self.batch_count,
                });
            }
        }

        let family = self.instance.family();
        let mut sums = vec![0.0; n];
        for (arm, &count) in counts.iter().enumerate() {
            let mean = self.instance.means()[arm];
            let mut sum = 0.0;
            for _ in 0..count {
                let reward = family.sample_unchecked(mean, &mut self.rng);
                sum += reward;
                if let Some(log) = self.pull_log.as_mut() {
                    log.push(Pull {
                        arm: arm as u32,
                        reward,
                    });
                }
            }
            self.stats.record_many(arm, count, sum);
            sums[arm] = sum;
        }
        if requested > 0 {
            self.batch_count += 1;
        }
        Ok(BatchOutcome {
            counts: counts.to_vec(),
            sums,
        })
    }
}
