use serde::{Deserialize, Serialize};

use crate::error::{BaiError, Result};
use crate::stopping::StoppingThreshold;

/// Perturbation used by the experimental protocol in place of `1 / ln ln(1/delta)`.
pub const EXPERIMENT_EPSILON: f64 = 0.01;

/// Parameters shared by Tri-BBAI and Opt-BBAI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriParams {
    pub delta: f64,
    pub alpha: f64,
    /// Perturbation applied to empirical means before solving for `w*`.
    pub epsilon: f64,
    /// Stage I pulls per arm.
    pub l1: u64,
    /// Per-arm cap on each Stage II target.
    pub l2: u64,
    /// Per-arm total reached by Tri-BBAI's Stage IV.
    pub l3: u64,
    pub max_stage2_rounds: u64,
    /// Threshold of the Stage III Chernoff test.
    pub threshold: StoppingThreshold,
}

impl TriParams {
    /// The asymptotic parameter choice:
    /// `eps = 1 / ln ln(1/delta)`, `L1 = ceil(sqrt(ln(1/delta)))`,
    /// `L2 = ceil(ln(1/delta) ln ln(1/delta) / n)`, `L3 = ceil(ln(1/delta)^2)`,
    /// at most `ceil(ln(1/delta))` Stage II rounds and the `beta(t, delta/2)` threshold.
    ///
    /// Needs `ln ln(1/delta) > 0`, i.e. `delta < 1/e`.
    pub fn new(delta: f64, alpha: f64, num_arms: usize) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(BaiError::Domain(format!("delta = {delta} outside (0, 1)")));
        }
        if !(alpha > 1.0 && alpha <= std::f64::consts::E / 2.0) {
            return Err(BaiError::Domain(format!("alpha = {alpha} outside (1, e/2]")));
        }
        if num_arms < 2 {
            return Err(BaiError::Precondition(format!("need at least 2 arms, got {num_arms}")));
        }
        let log_inv = (1.0 / delta).ln();
        let log_log = log_inv.ln();
        if log_log <= 0.0 {
            return Err(BaiError::Domain(format!(
                "delta = {delta} >= 1/e makes ln ln(1/delta) non-positive"
            )));
        }
        Ok(TriParams {
            delta,
            alpha,
            epsilon: 1.0 / log_log,
            l1: log_inv.sqrt().ceil() as u64,
            l2: (log_inv * log_log / num_arms as f64).ceil() as u64,
            l3: (log_inv * log_inv).ceil() as u64,
            max_stage2_rounds: log_inv.ceil() as u64,
            threshold: StoppingThreshold::HalfConfidence { alpha },
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_threshold(mut self, threshold: StoppingThreshold) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn with_l2(mut self, l2: u64) -> Self {
        self.l2 = l2;
        self
    }

    pub fn log_inv_delta(&self) -> f64 {
        (1.0 / self.delta).ln()
    }
}
