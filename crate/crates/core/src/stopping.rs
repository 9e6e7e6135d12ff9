//! Sufficient statistics, the pairwise Chernoff statistic and stopping thresholds.

use serde::{Deserialize, Serialize};

use crate::error::{BaiError, Result};
use crate::family::{argmax, RewardFamily};

/// Per-arm pull counts `N_i(t)` and reward sums; empirical means are `sum / count`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmStats {
    pulls: Vec<u64>,
    sums: Vec<f64>,
}

impl ArmStats {
    pub fn new(num_arms: usize) -> Self {
        ArmStats {
            pulls: vec![0; num_arms],
            sums: vec![0.0; num_arms],
        }
    }

    /// Builds statistics directly from counts and empirical means.
    pub fn from_means(pulls: &[u64], means: &[f64]) -> Result<Self> {
        if pulls.len() != means.len() {
            return Err(BaiError::Precondition(format!(
                "{} pull counts but {} means",
                pulls.len(),
                means.len()
            )));
        }
        let sums = pulls.iter().zip(means).map(|(&n, &m)| n as f64 * m).collect();
        Ok(ArmStats {
            pulls: pulls.to_vec(),
            sums,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.pulls.len()
    }

    pub fn record(&mut self, arm: usize, reward: f64) {
        self.pulls[arm] += 1;
        self.sums[arm] += reward;
    }

    pub(crate) fn record_many(&mut self, arm: usize, count: u64, sum: f64) {
        self.pulls[arm] += count;
        self.sums[arm] += sum;
    }

    pub fn pulls(&self) -> &[u64] {
        &self.pulls
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    /// `t`: total pulls across arms.
    pub fn total(&self) -> u64 {
        self.pulls.iter().sum()
    }

    /// Empirical mean of `arm`; `NaN` when it has never been pulled.
    pub fn mean(&self, arm: usize) -> f64 {
        if self.pulls[arm] == 0 {
            f64::NAN
        } else {
            self.sums[arm] / self.pulls[arm] as f64
        }
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.num_arms()).map(|i| self.mean(i)).collect()
    }

    /// `i*(t)`: the empirical leader, lowest index on ties.
    pub fn leader(&self) -> Result<usize> {
        self.require_all_pulled()?;
        Ok(argmax(&self.means()))
    }

    fn require_all_pulled(&self) -> Result<()> {
        match self.pulls.iter().position(|&n| n == 0) {
            Some(arm) => Err(BaiError::UndefinedStatistic(format!("arm {arm} has never been pulled"))),
            None => Ok(()),
        }
    }
}

/// `(N_i mu_i + N_j mu_j) / (N_i + N_j)`.
pub fn weighted_mean(stats: &ArmStats, i: usize, j: usize) -> Result<f64> {
    let (ni, nj) = (stats.pulls[i], stats.pulls[j]);
    if ni + nj == 0 {
        return Err(BaiError::UndefinedStatistic(format!(
            "arms {i} and {j} have no pulls between them"
        )));
    }
    Ok((stats.sums[i] + stats.sums[j]) / (ni + nj) as f64)
}

/// `Z_ij = N_i d(mu_i, mu_ij) + N_j d(mu_j, mu_ij)` for `mu_i >= mu_j`.
///
/// Exactly equal means give zero. Unpulled arms contribute nothing; an infinite KL term
/// yields `+inf` rather than an error.
pub fn chernoff_z(family: RewardFamily, stats: &ArmStats, i: usize, j: usize) -> Result<f64> {
    let mid = weighted_mean(stats, i, j)?;
    let (mi, mj) = (stats.mean(i), stats.mean(j));
    let (ni, nj) = (stats.pulls[i], stats.pulls[j]);
    if ni > 0 && nj > 0 {
        if mi < mj {
            return Err(BaiError::Precondition(format!(
                "Z_ij needs mu_i >= mu_j, got {mi} < {mj} for ({i}, {j})"
            )));
        }
        if mi == mj {
            return Ok(0.0);
        }
    }
    let term = |n: u64, m: f64| {
        if n == 0 {
            0.0
        } else {
            n as f64 * family.kl_unchecked(m, mid)
        }
    };
    Ok(term(ni, mi) + term(nj, mj))
}

/// `(i*, min_{j != i*} Z_{i* j})`.
pub fn min_z(family: RewardFamily, stats: &ArmStats) -> Result<(usize, f64)> {
    let leader = stats.leader()?;
    let mut value = f64::INFINITY;
    for j in (0..stats.num_arms()).filter(|&j| j != leader) {
        value = value.min(chernoff_z(family, stats, leader, j)?);
    }
    Ok((leader, value))
}

fn check_confidence(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(BaiError::Domain(format!("confidence delta = {delta} outside (0, 1)")))
    }
}

/// `beta(t, delta) = ln(ln(1/delta) t^alpha / delta)`.
///
/// The Stage III comparison uses `beta(t, delta / 2) = ln(2 ln(2/delta) t^alpha / delta)`;
/// see [`StoppingThreshold::HalfConfidence`].
pub fn beta_threshold(t: u64, delta: f64, alpha: f64) -> Result<f64> {
    if t == 0 {
        return Err(BaiError::Domain("beta needs t >= 1".into()));
    }
    check_confidence(delta)?;
    if !(alpha > 1.0 && alpha <= std::f64::consts::E / 2.0) {
        return Err(BaiError::Domain(format!("alpha = {alpha} outside (1, e/2]")));
    }
    let log_inv = (1.0 / delta).ln();
    Ok(log_inv.ln() + alpha * (t as f64).ln() + log_inv)
}

/// `ln((ln t + 1) / delta)`, the empirically tuned Track-and-Stop threshold.
pub fn tas_beta_threshold(t: u64, delta: f64) -> Result<f64> {
    if t == 0 {
        return Err(BaiError::Domain("beta needs t >= 1".into()));
    }
    check_confidence(delta)?;
    Ok(((t as f64).ln() + 1.0).ln() - delta.ln())
}

/// Which threshold a Chernoff stopping test compares `min_j Z_j` against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoppingThreshold {
    /// `beta(t, delta / 2)` with exponent `alpha`.
    HalfConfidence { alpha: f64 },
    /// `ln((ln t + 1) / delta)`.
    TrackAndStop,
}

impl StoppingThreshold {
    pub fn value(&self, t: u64, delta: f64) -> Result<f64> {
        match *self {
            StoppingThreshold::HalfConfidence { alpha } => beta_threshold(t, delta / 2.0, alpha),
            StoppingThreshold::TrackAndStop => tas_beta_threshold(t, delta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const B: RewardFamily = RewardFamily::Bernoulli;
    const G: RewardFamily = RewardFamily::GaussianUnitVariance;

    fn stats(pulls: &[u64], means: &[f64]) -> ArmStats {
        ArmStats::from_means(pulls, means).unwrap()
    }

    #[test]
    fn weighted_mean_cases() {
        let s = stats(&[5, 5], &[0.8, 0.2]);
        assert!((weighted_mean(&s, 0, 1).unwrap() - 0.5).abs() < 1e-15);
        let s = stats(&[3, 1], &[0.8, 0.4]);
        assert!((weighted_mean(&s, 0, 1).unwrap() - 0.7).abs() < 1e-15);
        let s = stats(&[4, 0], &[0.25, 0.0]);
        assert_eq!(weighted_mean(&s, 0, 1).unwrap(), 0.25);
        let s = ArmStats::new(2);
        assert!(matches!(weighted_mean(&s, 0, 1), Err(BaiError::UndefinedStatistic(_))));
    }

    #[test]
    fn chernoff_reference_values() {
        let s = stats(&[10, 30], &[0.4, 0.4]);
        assert_eq!(chernoff_z(B, &s, 0, 1).unwrap(), 0.0);

        let (n, gap) = (40u64, 0.3);
        let s = stats(&[n, n], &[1.0 + gap, 1.0]);
        let z = chernoff_z(G, &s, 0, 1).unwrap();
        assert!((z - n as f64 * gap * gap / 4.0).abs() < 1e-12);

        let s = stats(&[100, 100], &[0.6, 0.4]);
        assert!((chernoff_z(B, &s, 0, 1).unwrap() - 4.0272).abs() < 1e-3);
        assert!(matches!(chernoff_z(B, &s, 1, 0), Err(BaiError::Precondition(_))));
    }

    #[test]
    fn chernoff_boundary_means_are_finite() {
        let s = stats(&[7, 9], &[1.0, 0.0]);
        let z = chernoff_z(B, &s, 0, 1).unwrap();
        assert!(z.is_finite() && z > 0.0);
        let s = stats(&[3, 0], &[1.0, 0.0]);
        assert_eq!(chernoff_z(B, &s, 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn min_z_cases() {
        let s = stats(&[20, 30], &[0.3, 0.7]);
        let (leader, value) = min_z(B, &s).unwrap();
        assert_eq!(leader, 1);
        assert_eq!(value, chernoff_z(B, &s, 1, 0).unwrap());

        let s = stats(&[5, 6, 7], &[0.5, 0.5, 0.5]);
        assert_eq!(min_z(B, &s).unwrap(), (0, 0.0));

        let s = stats(&[100, 100, 100], &[0.6, 0.4, 0.5]);
        let (leader, value) = min_z(B, &s).unwrap();
        assert_eq!(leader, 0);
        let z2 = chernoff_z(B, &s, 0, 1).unwrap();
        let z3 = chernoff_z(B, &s, 0, 2).unwrap();
        assert!(z3 < z2);
        assert_eq!(value, z3);

        let s = stats(&[5, 0], &[0.5, 0.0]);
        assert!(matches!(min_z(B, &s), Err(BaiError::UndefinedStatistic(_))));
    }

    #[test]
    fn beta_reference_values() {
        let b = beta_threshold(100, 0.1, 1.001).unwrap();
        assert!((b - 7.746).abs() < 1e-3);
        assert!(beta_threshold(200, 0.1, 1.001).unwrap() > b);
        assert!(beta_threshold(100, 0.01, 1.001).unwrap() > b);
        let half = StoppingThreshold::HalfConfidence { alpha: 1.001 }.value(100, 0.1).unwrap();
        let expected = (2.0 * 20f64.ln() * 100f64.powf(1.001) / 0.1).ln();
        assert!((half - expected).abs() < 1e-12);
        assert!(beta_threshold(0, 0.1, 1.001).is_err());
        assert!(beta_threshold(10, 1.0, 1.001).is_err());
        assert!(beta_threshold(10, 0.1, 1.0).is_err());
        assert!(beta_threshold(10, 0.1, 1.5).is_err());
    }

    #[test]
    fn tas_beta_reference_values() {
        assert!((tas_beta_threshold(1, 0.1).unwrap() - std::f64::consts::LN_10).abs() < 1e-12);
        // t = 3 > e; the exact e-case is covered through the formula below.
        assert!(tas_beta_threshold(3, 0.1).unwrap() > tas_beta_threshold(2, 0.1).unwrap());
        let at_e = ((std::f64::consts::E.ln() + 1.0) / 0.5).ln();
        assert!((at_e - 4f64.ln()).abs() < 1e-15);
        assert!(tas_beta_threshold(0, 0.1).is_err());
        assert!(tas_beta_threshold(5, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn z_properties(
            ni in 1u64..500, nj in 1u64..500,
            a in 0.0f64..=1.0, b in 0.0f64..=1.0,
        ) {
            let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
            let s = stats(&[ni, nj], &[hi, lo]);
            let z = chernoff_z(B, &s, 0, 1).unwrap();
            prop_assert!(z >= 0.0 && z.is_finite());

            // Same pair listed in the other slot order.
            let swapped = stats(&[nj, ni], &[lo, hi]);
            prop_assert_eq!(chernoff_z(B, &swapped, 1, 0).unwrap(), z);

            let doubled = stats(&[2 * ni, 2 * nj], &[hi, lo]);
            let z2 = chernoff_z(B, &doubled, 0, 1).unwrap();
            prop_assert!((z2 - 2.0 * z).abs() <= 1e-9 * z.max(1.0));
        }

        #[test]
        fn gaussian_leader_shift_invariant(
            means in proptest::collection::vec(-3.0f64..3.0, 2..8),
            shift in -5.0f64..5.0,
        ) {
            let pulls = vec![10; means.len()];
            let shifted: Vec<f64> = means.iter().map(|m| m + shift).collect();
            let (a, _) = min_z(G, &stats(&pulls, &means)).unwrap();
            let (b, _) = min_z(G, &stats(&pulls, &shifted)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
