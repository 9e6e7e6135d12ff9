//! Mean-parameterized reward models.
//!
//! Both families are one-parameter exponential families, represented here only
//! through their mean and the closed-form KL divergence `d(mu, lambda)`.
//! All logarithms are natural.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{BaiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardFamily {
    /// Rewards in {0, 1}; means in [0, 1].
    Bernoulli,
    /// Normal rewards with unit variance; any finite mean.
    #[serde(rename = "gaussian")]
    GaussianUnitVariance,
}

impl RewardFamily {
    pub fn check_mean(self, mean: f64) -> Result<()> {
        let ok = match self {
            RewardFamily::Bernoulli => (0.0..=1.0).contains(&mean),
            RewardFamily::GaussianUnitVariance => mean.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(BaiError::Domain(format!("mean {mean} outside the {self} domain")))
        }
    }

    /// True when `mean` is strictly inside the domain, where every KL value is finite.
    pub fn is_interior(self, mean: f64) -> bool {
        match self {
            RewardFamily::Bernoulli => mean > 0.0 && mean < 1.0,
            RewardFamily::GaussianUnitVariance => mean.is_finite(),
        }
    }

    /// Reward variance at the given mean.
    pub fn variance(self, mean: f64) -> f64 {
        match self {
            RewardFamily::Bernoulli => mean * (1.0 - mean),
            RewardFamily::GaussianUnitVariance => 1.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, mean: f64, rng: &mut R) -> Result<f64> {
        self.check_mean(mean)?;
        Ok(self.sample_unchecked(mean, rng))
    }

    /// Sampling without the domain check; the environment validates means once up front.
    #[inline]
    pub(crate) fn sample_unchecked<R: Rng + ?Sized>(self, mean: f64, rng: &mut R) -> f64 {
        match self {
            // gen::<f64>() is in [0, 1): mean 0 never fires, mean 1 always does.
            RewardFamily::Bernoulli => {
                if rng.gen::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            RewardFamily::GaussianUnitVariance => {
                let z: f64 = rng.sample(StandardNormal);
                mean + z
            }
        }
    }

    /// KL divergence `d(mu, lambda)` between the members with means `mu` and `lambda`.
    ///
    /// May return `+inf` for Bernoulli when `lambda` sits on the boundary and `mu` does not
    /// match it; that is a value, not an error.
    pub fn kl(self, mu: f64, lambda: f64) -> Result<f64> {
        self.check_mean(mu)?;
        self.check_mean(lambda)?;
        Ok(self.kl_unchecked(mu, lambda))
    }

    #[inline]
    pub(crate) fn kl_unchecked(self, mu: f64, lambda: f64) -> f64 {
        match self {
            RewardFamily::Bernoulli => {
                if mu == lambda {
                    return 0.0;
                }
                let h = lambda - mu;
                if mu > 0.0 && mu < 1.0 && h.abs() < 1e-3 * mu.min(1.0 - mu) {
                    return bernoulli_kl_series(mu, h);
                }
                let kl = xlogx_over_y(mu, lambda) + xlogx_over_y(1.0 - mu, 1.0 - lambda);
                // Rounding can push tiny divergences just below zero.
                kl.max(0.0)
            }
            RewardFamily::GaussianUnitVariance => {
                let diff = mu - lambda;
                diff * diff / 2.0
            }
        }
    }
}

/// `d(mu, mu + h) = sum_k h^k / k * ((-1)^k / mu^(k-1) + 1 / (1 - mu)^(k-1))`, free of the
/// cancellation the closed form suffers for nearby means.
fn bernoulli_kl_series(mu: f64, h: f64) -> f64 {
    let (a, b) = (-h / mu, h / (1.0 - mu));
    let (mut pa, mut pb) = (a, b);
    let mut sum = 0.0;
    for k in 2..=8 {
        pa *= a;
        pb *= b;
        let term = (mu * pa + (1.0 - mu) * pb) / k as f64;
        sum += term;
    }
    sum.max(0.0)
}

/// `x * ln(x / y)` with `0 ln 0 = 0` and `x ln(x / 0) = +inf` for `x > 0`.
#[inline]
fn xlogx_over_y(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if y == 0.0 {
        f64::INFINITY
    } else {
        x * (x / y).ln()
    }
}

impl fmt::Display for RewardFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewardFamily::Bernoulli => f.write_str("bernoulli"),
            RewardFamily::GaussianUnitVariance => f.write_str("gaussian"),
        }
    }
}

impl FromStr for RewardFamily {
    type Err = BaiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bernoulli" => Ok(RewardFamily::Bernoulli),
            "gaussian" | "normal" | "gaussian-unit-variance" => {
                Ok(RewardFamily::GaussianUnitVariance)
            }
            other => Err(BaiError::Config(format!("unknown reward family `{other}`"))),
        }
    }
}

/// Ground truth for a trial: one mean per arm plus the reward family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditInstance {
    family: RewardFamily,
    means: Vec<f64>,
}

impl BanditInstance {
    pub fn new(family: RewardFamily, means: Vec<f64>) -> Result<Self> {
        if means.len() < 2 {
            return Err(BaiError::Precondition(format!(
                "a bandit instance needs at least 2 arms, got {}",
                means.len()
            )));
        }
        for &m in &means {
            family.check_mean(m)?;
        }
        Ok(BanditInstance { family, means })
    }

    pub fn family(&self) -> RewardFamily {
        self.family
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn num_arms(&self) -> usize {
        self.means.len()
    }

    /// Index of the largest mean, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.means)
    }

    /// The best arm, if the maximum is attained by exactly one arm.
    pub fn unique_best(&self) -> Option<usize> {
        let best = self.argmax();
        let top = self.means[best];
        let ties = self.means.iter().filter(|&&m| m == top).count();
        (ties == 1).then_some(best)
    }

    /// Gaps `max_j mu_j - mu_i`.
    pub fn gaps(&self) -> Vec<f64> {
        let top = self.means[self.argmax()];
        self.means.iter().map(|m| top - m).collect()
    }
}

/// Lowest index attaining the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
