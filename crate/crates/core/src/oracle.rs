//! Optimal allocation `w*(mu)` and characteristic time `T*(mu)`.
//!
//! The alternative set never has to be materialized: for a fixed weight vector the
//! inner infimum has the closed form returned by [`best_response_value`], and the
//! maximizing weights are pinned down by the root `y*` of `F_mu(y) = 1`, where each
//! `x_i(y)` inverts the increasing map `g_i`.
//!
//! Functions documented as "best-first" expect arm 0 to be the unique best arm.
//! [`solve_allocation`] and [`grid_oracle`] accept any order and reorder internally.

use serde::{Deserialize, Serialize};

use crate::error::{BaiError, Result};
use crate::family::{BanditInstance, RewardFamily};

/// Absolute tolerance on `F_mu(y*) - 1`.
pub const OUTER_TOLERANCE: f64 = 1e-8;
/// Absolute tolerance guaranteed by [`invert_g`].
pub const INNER_TOLERANCE: f64 = 1e-10;
/// The upper end of the `y` bracket stays this far (relatively) below `d(mu_1, mu_2)`.
const ASYMPTOTE_MARGIN: f64 = 1e-12;
const SIMPLEX_TOLERANCE: f64 = 1e-9;
const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationSolution {
    /// Optimal proportions, in the caller's arm order.
    pub weights: Vec<f64>,
    /// `T*(mu)`: expected samples per unit of `ln(1/delta)`.
    pub characteristic_time: f64,
    /// Root `y*` of `F_mu(y) = 1`; `None` when not computed (grid oracle).
    pub multiplier: Option<f64>,
}

/// `I_c(mu, mu') = c d(mu, m) + (1 - c) d(mu', m)` with `m = c mu + (1 - c) mu'`.
pub fn i_fn(family: RewardFamily, c: f64, mu1: f64, mui: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(BaiError::Domain(format!("mixing weight {c} outside [0, 1]")));
    }
    family.check_mean(mu1)?;
    family.check_mean(mui)?;
    Ok(weighted_divergence(family, c, mu1, 1.0 - c, mui))
}

/// `a d(mu_a, m) + b d(mu_b, m)` with `m` the `(a, b)`-weighted mean; zero weights drop their term.
#[inline]
fn weighted_divergence(family: RewardFamily, a: f64, mu_a: f64, b: f64, mu_b: f64) -> f64 {
    let total = a + b;
    if total <= 0.0 {
        return 0.0;
    }
    let m = (a * mu_a + b * mu_b) / total;
    let mut value = 0.0;
    if a > 0.0 {
        value += a * family.kl_unchecked(mu_a, m);
    }
    if b > 0.0 {
        value += b * family.kl_unchecked(mu_b, m);
    }
    value
}

/// `g_i(x) = (1 + x) I_{1/(1+x)}(mu_1, mu_i)`, evaluated as `d(mu_1, m) + x d(mu_i, m)`.
pub fn g_fn(family: RewardFamily, x: f64, mu1: f64, mui: f64) -> Result<f64> {
    check_pair(family, mu1, mui)?;
    if x.is_nan() || x < 0.0 {
        return Err(BaiError::Domain(format!("g is defined for x >= 0, got {x}")));
    }
    Ok(g_unchecked(family, x, mu1, mui))
}

#[inline]
fn g_unchecked(family: RewardFamily, x: f64, mu1: f64, mui: f64) -> f64 {
    if x.is_infinite() {
        return family.kl_unchecked(mu1, mui);
    }
    weighted_divergence(family, 1.0, mu1, x, mui)
}

#[inline]
fn mixture(x: f64, mu1: f64, mui: f64) -> f64 {
    mui + (mu1 - mui) / (1.0 + x)
}

fn check_pair(family: RewardFamily, mu1: f64, mui: f64) -> Result<()> {
    family.check_mean(mu1)?;
    family.check_mean(mui)?;
    if mu1 <= mui {
        return Err(BaiError::Precondition(format!(
            "g needs mu_1 > mu_i, got {mu1} <= {mui}"
        )));
    }
    Ok(())
}

/// Solves `g_i(x) = y` for `x >= 0`.
///
/// Doubles an upper bound until `g` exceeds `y`, then shrinks the bracket. Each step
/// tries a Newton update (`g'(x) = d(mu_i, m(x))`) and falls back to the midpoint
/// whenever the update leaves the bracket.
pub fn invert_g(family: RewardFamily, y: f64, mu1: f64, mui: f64) -> Result<f64> {
    check_pair(family, mu1, mui)?;
    if y.is_nan() || y < 0.0 {
        return Err(BaiError::Domain(format!("cannot invert g at y = {y}")));
    }
    let asymptote = family.kl_unchecked(mu1, mui);
    if y >= asymptote {
        return Err(BaiError::Range(format!(
            "y = {y} is at or beyond the asymptote d(mu_1, mu_i) = {asymptote}"
        )));
    }
    Ok(invert_g_unchecked(family, y, mu1, mui))
}

fn invert_g_unchecked(family: RewardFamily, y: f64, mu1: f64, mui: f64) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while g_unchecked(family, hi, mu1, mui) < y {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::MAX;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTIONS {
        let residual = g_unchecked(family, x, mu1, mui) - y;
        if residual == 0.0 {
            return x;
        }
        if residual < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if residual.abs() <= 1e-15 || hi - lo <= f64::EPSILON * hi {
            break;
        }
        let slope = family.kl_unchecked(mui, mixture(x, mu1, mui));
        let newton = x - residual / slope;
        x = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    x
}

/// Checks that arm 0 is the unique best and that every mean is in the family interior.
fn check_best_first(instance: &BanditInstance) -> Result<()> {
    let family = instance.family();
    let means = instance.means();
    for &m in means {
        if !family.is_interior(m) {
            return Err(BaiError::Domain(format!(
                "mean {m} is on the boundary of the {family} domain"
            )));
        }
    }
    let mu1 = means[0];
    for (i, &m) in means.iter().enumerate().skip(1) {
        if m == mu1 {
            return Err(BaiError::Degenerate(format!(
                "arm {i} ties the best arm at {mu1}; T* is infinite"
            )));
        }
        if m > mu1 {
            return Err(BaiError::Precondition(format!(
                "arm 0 must be the best arm, but arm {i} has mean {m} > {mu1}"
            )));
        }
    }
    Ok(())
}

/// Upper end of the domain of `F_mu`: `d(mu_1, mu_2)` for the runner-up `mu_2`.
fn f_domain_end(instance: &BanditInstance) -> f64 {
    let means = instance.means();
    let runner_up = means[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    instance.family().kl_unchecked(means[0], runner_up)
}

/// `F_mu(y) = sum_{i>=2} d(mu_1, m_i) / d(mu_i, m_i)`, `m_i = (mu_1 + x_i(y) mu_i) / (1 + x_i(y))`.
///
/// Best-first; `y` must lie in `[0, d(mu_1, mu_2))`.
pub fn f_mu(instance: &BanditInstance, y: f64) -> Result<f64> {
    check_best_first(instance)?;
    let end = f_domain_end(instance);
    if !(0.0..end).contains(&y) {
        return Err(BaiError::Range(format!("F_mu is defined on [0, {end}), got y = {y}")));
    }
    Ok(f_mu_unchecked(instance.family(), instance.means(), y, None))
}

/// Evaluates `F_mu(y)`, optionally storing `x_i(y)` for `i >= 2` into `xs[i]`.
fn f_mu_unchecked(family: RewardFamily, means: &[f64], y: f64, mut xs: Option<&mut [f64]>) -> f64 {
    let mu1 = means[0];
    let mut total = 0.0;
    for (i, &mui) in means.iter().enumerate().skip(1) {
        let x = invert_g_unchecked(family, y, mu1, mui);
        if let Some(buf) = xs.as_deref_mut() {
            buf[i] = x;
        }
        let m = mixture(x, mu1, mui);
        total += family.kl_unchecked(mu1, m) / family.kl_unchecked(mui, m);
    }
    total
}

/// The closed-form inner infimum `min_{i != 1} (w_1 + w_i) I_{w_1/(w_1+w_i)}(mu_1, mu_i)`.
///
/// Best-first. At `w*` this equals `1 / T*`.
pub fn best_response_value(instance: &BanditInstance, weights: &[f64]) -> Result<f64> {
    check_best_first(instance)?;
    check_simplex(weights, instance.num_arms())?;
    Ok(best_response_unchecked(instance.family(), instance.means(), weights))
}

fn best_response_unchecked(family: RewardFamily, means: &[f64], weights: &[f64]) -> f64 {
    let (mu1, w1) = (means[0], weights[0]);
    means
        .iter()
        .zip(weights)
        .skip(1)
        .map(|(&mui, &wi)| weighted_divergence(family, w1, mu1, wi, mui))
        .fold(f64::INFINITY, f64::min)
}

fn check_simplex(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(BaiError::Precondition(format!(
            "expected {n} weights, got {}",
            weights.len()
        )));
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| w.is_nan() || w < -SIMPLEX_TOLERANCE) || (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(BaiError::Precondition(format!(
            "weights are not on the simplex (sum = {sum})"
        )));
    }
    Ok(())
}

/// Arm indices sorted by decreasing mean, lowest index first among equal means.
fn best_first_order(means: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
    order
}

fn reorder(instance: &BanditInstance) -> Result<(Vec<usize>, BanditInstance)> {
    let order = best_first_order(instance.means());
    let sorted = order.iter().map(|&i| instance.means()[i]).collect();
    let sorted = BanditInstance::new(instance.family(), sorted)?;
    check_best_first(&sorted)?;
    Ok((order, sorted))
}

fn unsort(order: &[usize], sorted_values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; order.len()];
    for (&original, &v) in order.iter().zip(sorted_values) {
        out[original] = v;
    }
    out
}

/// Computes `w*(mu)`, `T*(mu)` and `y*` for any arm order.
///
/// Bisects on `y` until `|F_mu(y) - 1| <= 1e-8`, sets `x_1 = 1`, normalizes the
/// `x`-vector and evaluates `T* = 1 / best_response_value(w*)`.
pub fn solve_allocation(instance: &BanditInstance) -> Result<AllocationSolution> {
    let (order, sorted) = reorder(instance)?;
    let family = sorted.family();
    let means = sorted.means();

    let mut lo = 0.0;
    let mut hi = f_domain_end(&sorted) * (1.0 - ASYMPTOTE_MARGIN);
    let mut xs = vec![0.0; means.len()];
    let mut y = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTIONS {
        let f = f_mu_unchecked(family, means, y, Some(&mut xs));
        if (f - 1.0).abs() <= OUTER_TOLERANCE {
            break;
        }
        if f < 1.0 {
            lo = y;
        } else {
            hi = y;
        }
        let next = 0.5 * (lo + hi);
        if next == y {
            break;
        }
        y = next;
    }
    xs[0] = 1.0;
    let total: f64 = xs.iter().sum();
    let sorted_weights: Vec<f64> = xs.iter().map(|x| x / total).collect();
    let value = best_response_unchecked(family, means, &sorted_weights);
    Ok(AllocationSolution {
        weights: unsort(&order, &sorted_weights),
        characteristic_time: 1.0 / value,
        multiplier: Some(y),
    })
}

/// Largest number of arms the grid oracle accepts.
pub const GRID_MAX_ARMS: usize = 4;

/// Brute-force maximization of [`best_response_value`] over the simplex grid
/// `{k / resolution : sum k = resolution}`.
///
/// Independent of the root-finding route; used to verify [`solve_allocation`].
pub fn grid_oracle(instance: &BanditInstance, resolution: usize) -> Result<AllocationSolution> {
    let n = instance.num_arms();
    if n > GRID_MAX_ARMS {
        return Err(BaiError::Capability(format!(
            "grid oracle handles at most {GRID_MAX_ARMS} arms, got {n}"
        )));
    }
    if resolution < 50 {
        return Err(BaiError::Precondition(format!(
            "grid resolution must be at least 50, got {resolution}"
        )));
    }
    let (order, sorted) = reorder(instance)?;
    let family = sorted.family();
    let means = sorted.means();
    let step = 1.0 / resolution as f64;

    let mut counts = vec![0usize; n];
    let mut weights = vec![0.0; n];
    let mut best_value = f64::NEG_INFINITY;
    let mut best_counts = counts.clone();
    enumerate_compositions(&mut counts, 0, resolution, &mut |counts| {
        for (w, &k) in weights.iter_mut().zip(counts.iter()) {
            *w = k as f64 * step;
        }
        let value = best_response_unchecked(family, means, &weights);
        if value > best_value {
            best_value = value;
            best_counts.copy_from_slice(counts);
        }
    });

    let sorted_weights: Vec<f64> = best_counts.iter().map(|&k| k as f64 * step).collect();
    Ok(AllocationSolution {
        weights: unsort(&order, &sorted_weights),
        characteristic_time: 1.0 / best_value,
        multiplier: None,
    })
}

fn enumerate_compositions(
    counts: &mut [usize],
    pos: usize,
    remaining: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if pos == counts.len() - 1 {
        counts[pos] = remaining;
        visit(counts);
        return;
    }
    for k in 0..=remaining {
        counts[pos] = k;
        enumerate_compositions(counts, pos + 1, remaining - k, visit);
    }
}
