//! Seeded Monte Carlo trials, aggregation and CSV output.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{opt_bbai, track_and_stop, tri_bbai, RunResult, StopReason, TriParams};
use crate::error::{BaiError, Result};
use crate::family::{BanditInstance, RewardFamily};
use crate::stopping::StoppingThreshold;

use super::env::{BatchedEnv, DEFAULT_PULL_CAP};
use super::instances::{make_instance, GeneratedInstance, InstanceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Algorithm {
    Tri,
    Opt,
    Tas,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Tri, Algorithm::Opt, Algorithm::Tas];
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Tri => "tri",
            Algorithm::Opt => "opt",
            Algorithm::Tas => "tas",
        })
    }
}

impl FromStr for Algorithm {
    type Err = BaiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tri" | "tri-bbai" | "tri_bbai" => Ok(Algorithm::Tri),
            "opt" | "opt-bbai" | "opt_bbai" => Ok(Algorithm::Opt),
            "tas" | "track-and-stop" | "track_and_stop" => Ok(Algorithm::Tas),
            other => Err(BaiError::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl TryFrom<String> for Algorithm {
    type Error = BaiError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> String {
        a.to_string()
    }
}

/// How Tri-BBAI / Opt-BBAI parameters are derived from `(delta, alpha, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamProfile {
    /// `eps = 1 / ln ln(1/delta)` and the `beta(t, delta/2)` threshold.
    Theoretical,
    /// `eps = 0.01` and the Track-and-Stop threshold `ln((ln t + 1) / delta)`.
    #[default]
    Experimental,
}

impl ParamProfile {
    pub fn params(self, delta: f64, alpha: f64, num_arms: usize) -> Result<TriParams> {
        let base = TriParams::new(delta, alpha, num_arms)?;
        Ok(match self {
            ParamProfile::Theoretical => base,
            ParamProfile::Experimental => base
                .with_epsilon(crate::algorithms::EXPERIMENT_EPSILON)
                .with_threshold(StoppingThreshold::TrackAndStop),
        })
    }
}

impl FromStr for ParamProfile {
    type Err = BaiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "theoretical" | "theory" => Ok(ParamProfile::Theoretical),
            "experimental" | "experiment" => Ok(ParamProfile::Experimental),
            other => Err(BaiError::Config(format!("unknown parameter profile `{other}`"))),
        }
    }
}

/// Knobs that apply to every trial of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSettings {
    pub alpha: f64,
    pub profile: ParamProfile,
    pub force_elimination: bool,
    pub pull_cap: Option<u64>,
    /// Replaces the profile's Stage II cap `L2`.
    pub l2: Option<u64>,
}

impl Default for TrialSettings {
    fn default() -> Self {
        TrialSettings {
            alpha: 1.001,
            profile: ParamProfile::default(),
            force_elimination: false,
            pull_cap: Some(DEFAULT_PULL_CAP),
            l2: None,
        }
    }
}

/// One trial's outcome. Aborted runs keep the accounting at abort time.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRun {
    pub result: Option<RunResult>,
    pub abort: Option<String>,
    pub samples: u64,
    pub batches: u64,
    pub seconds: f64,
}

/// Stream for trial `index` under `base_seed`.
///
/// `splitmix64(base_seed ^ splitmix64(index))`: each trial's randomness depends only on
/// its own index, so execution order and thread count cannot change results.
pub fn trial_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(index))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The instance a trial with stream `seed` runs on. Instance draws use stream 1 of the
/// seed; rewards use stream 0.
pub fn trial_instance(spec: &InstanceSpec, family: RewardFamily, seed: u64) -> Result<GeneratedInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    make_instance(spec, family, &mut rng)
}

/// Runs one strategy on a fresh environment seeded with `seed`.
///
/// Configuration mistakes are errors; failures inside the run (pull cap, oracle
/// capability) are recorded in the returned [`TrialRun`].
pub fn run_trial(
    algorithm: Algorithm,
    instance: &BanditInstance,
    delta: f64,
    settings: &TrialSettings,
    seed: u64,
) -> Result<TrialRun> {
    run_trial_in(algorithm, delta, settings, fresh_env(instance, settings, seed)).map(|(run, _)| run)
}

pub(crate) fn fresh_env(instance: &BanditInstance, settings: &TrialSettings, seed: u64) -> BatchedEnv {
    BatchedEnv::new(instance.clone(), seed)
        .with_pull_cap(settings.pull_cap)
        .with_forced_best_elimination(settings.force_elimination)
}

/// [`run_trial`] on a caller-built environment; hands the environment back for inspection.
pub fn run_trial_in(
    algorithm: Algorithm,
    delta: f64,
    settings: &TrialSettings,
    mut env: BatchedEnv,
) -> Result<(TrialRun, BatchedEnv)> {
    if settings.force_elimination && algorithm != Algorithm::Opt {
        return Err(BaiError::Config(format!(
            "forced elimination only applies to opt, not {algorithm}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BaiError::Config(format!("delta = {delta} outside (0, 1)")));
    }
    let params = match algorithm {
        Algorithm::Tas => None,
        _ => {
            let params = settings.profile.params(delta, settings.alpha, env.num_arms())?;
            Some(match settings.l2 {
                Some(l2) => params.with_l2(l2),
                None => params,
            })
        }
    };
    let start = Instant::now();
    let outcome = match (algorithm, params) {
        (Algorithm::Tri, Some(p)) => tri_bbai(&mut env, &p),
        (Algorithm::Opt, Some(p)) => opt_bbai(&mut env, &p),
        _ => track_and_stop(&mut env, delta),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (result, abort) = match outcome {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let run = TrialRun {
        result,
        abort,
        samples: env.total_pulls(),
        batches: env.batch_count(),
        seconds,
    };
    Ok((run, env))
}

/// One row of the per-trial CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub algo: Algorithm,
    pub family: RewardFamily,
    pub instance: String,
    pub delta: f64,
    pub trial: u64,
    pub seed: u64,
    /// Empty when the trial aborted.
    pub returned_arm: Option<usize>,
    pub correct: bool,
    pub samples: u64,
    pub batches: u64,
    /// A [`StopReason`] or `aborted`.
    pub stop_reason: String,
    pub seconds: f64,
}

/// One row of the summary CSV: aggregates over all trials of an (algorithm, instance, delta) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algo: Algorithm,
    pub instance: String,
    pub delta: f64,
    pub trials: u64,
    pub mean_samples: f64,
    pub std_samples: f64,
    pub mean_batches: f64,
    pub std_batches: f64,
    pub recall: f64,
}

pub const ABORTED: &str = "aborted";

impl TrialRecord {
    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop_reason.parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    #[serde(default = "default_family")]
    pub family: RewardFamily,
    pub instance: InstanceSpec,
    pub deltas: Vec<f64>,
    pub trials: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    pub output_path: PathBuf,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub profile: ParamProfile,
    #[serde(default)]
    pub force_elimination: bool,
    #[serde(default = "default_pull_cap")]
    pub pull_cap: Option<u64>,
    #[serde(default)]
    pub l2: Option<u64>,
}

fn default_family() -> RewardFamily {
    RewardFamily::Bernoulli
}

fn default_parallelism() -> usize {
    1
}

fn default_alpha() -> f64 {
    1.001
}

fn default_pull_cap() -> Option<u64> {
    Some(DEFAULT_PULL_CAP)
}

impl ExperimentConfig {
    pub fn new(algorithm: Algorithm, instance: InstanceSpec, deltas: Vec<f64>, trials: u64) -> Self {
        ExperimentConfig {
            algorithm,
            family: RewardFamily::Bernoulli,
            instance,
            deltas,
            trials,
            base_seed: 0,
            parallelism: 1,
            output_path: PathBuf::from("results"),
            alpha: 1.001,
            profile: ParamProfile::default(),
            force_elimination: false,
            pull_cap: Some(DEFAULT_PULL_CAP),
            l2: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(BaiError::Config("trials must be at least 1".into()));
        }
        if self.deltas.is_empty() {
            return Err(BaiError::Config("at least one delta is required".into()));
        }
        if let Some(d) = self.deltas.iter().find(|&&d| !(d > 0.0 && d < 1.0)) {
            return Err(BaiError::Config(format!("delta = {d} outside (0, 1)")));
        }
        if self.parallelism == 0 {
            return Err(BaiError::Config("parallelism must be at least 1".into()));
        }
        if self.force_elimination && self.algorithm != Algorithm::Opt {
            return Err(BaiError::Config(format!(
                "forced elimination only applies to opt, not {}",
                self.algorithm
            )));
        }
        Ok(())
    }

    pub fn settings(&self) -> TrialSettings {
        TrialSettings {
            alpha: self.alpha,
            profile: self.profile,
            force_elimination: self.force_elimination,
            pull_cap: self.pull_cap,
            l2: self.l2,
        }
    }
}

/// Runs `trials` seeded trials for one delta. Trial `k` draws its instance and its
/// rewards from `trial_seed(base_seed, k)`; records come back in trial order.
pub fn run_trials(config: &ExperimentConfig, delta: f64) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let settings = config.settings();
    let label = config.instance.to_string();
    let one = |trial: u64| -> Result<TrialRecord> {
        let seed = trial_seed(config.base_seed, trial);
        let generated = trial_instance(&config.instance, config.family, seed)?;
        let run = run_trial(config.algorithm, &generated.instance, delta, &settings, seed)?;
        Ok(TrialRecord {
            algo: config.algorithm,
            family: generated.instance.family(),
            instance: label.clone(),
            delta,
            trial,
            seed,
            returned_arm: run.result.as_ref().map(|r| r.returned_arm),
            correct: run.result.as_ref().is_some_and(|r| r.correct),
            samples: run.samples,
            batches: run.batches,
            stop_reason: run
                .result
                .as_ref()
                .map_or_else(|| ABORTED.to_string(), |r| r.stop_reason.to_string()),
            seconds: run.seconds,
        })
    };
    if config.parallelism == 1 {
        return (0..config.trials).map(one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| BaiError::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| (0..config.trials).into_par_iter().map(one).collect())
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Groups records by (algorithm, instance, delta) in first-seen order. Standard
/// deviations use the `n - 1` denominator.
pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Algorithm, &str, f64)> = Vec::new();
    for r in records {
        let key = (r.algo, r.instance.as_str(), r.delta);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(algo, instance, delta)| {
            let cell: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.algo == algo && r.instance == instance && r.delta == delta)
                .collect();
            let (mean_samples, std_samples) = mean_std(cell.iter().map(|r| r.samples as f64));
            let (mean_batches, std_batches) = mean_std(cell.iter().map(|r| r.batches as f64));
            let correct = cell.iter().filter(|r| r.correct).count();
            SummaryRow {
                algo,
                instance: instance.to_string(),
                delta,
                trials: cell.len() as u64,
                mean_samples,
                std_samples,
                mean_batches,
                std_batches,
                recall: correct as f64 / cell.len() as f64,
            }
        })
        .collect()
}

pub const TRIALS_FILE: &str = "trials.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Runs every delta of the config, writes `trials.csv` and `summary.csv` under
/// `output_path`, and returns the summary.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<SummaryRow>> {
    config.validate()?;
    let mut records = Vec::new();
    for &delta in &config.deltas {
        records.extend(run_trials(config, delta)?);
    }
    write_results(&config.output_path, &records)
}

/// Writes both CSV files for `records` into `dir` and returns the summary.
pub fn write_results(dir: &Path, records: &[TrialRecord]) -> Result<Vec<SummaryRow>> {
    fs::create_dir_all(dir).map_err(|e| BaiError::io(dir, e))?;
    let summary = summarize(records);
    write_csv(&dir.join(TRIALS_FILE), records)?;
    write_csv(&dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| BaiError::csv(path, e))?;
    for row in rows {
        writer.serialize(row).map_err(|e| BaiError::csv(path, e))?;
    }
    writer.flush().map_err(|e| BaiError::io(path, e))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| BaiError::csv(path, e))?;
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| BaiError::csv(path, e))
}
