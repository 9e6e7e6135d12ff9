//! Opt-BBAI's Stage IV: successive elimination with exponentially shrinking gaps,
//! plus the audit that re-samples eliminated arms in case the best one was dropped.
//!
//! Confidence levels are kept in log domain: `gamma_j` is squared on every trigger and
//! underflows `f64` after a handful of squarings.

use std::f64::consts::{LN_2, PI};

use crate::error::{BaiError, Result};
use crate::harness::{BatchOutcome, BatchedEnv};

/// Bookkeeping for one completed elimination round `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct EliminationRound {
    /// Round index `j`, starting at 1.
    pub index: u32,
    /// `eps_j = 2^-j / 4`.
    pub epsilon: f64,
    /// `ln delta_j`, `delta_j = delta / (40 pi^2 n j^2)`.
    pub log_delta: f64,
    /// `d_j` pulls per active arm.
    pub pulls_per_arm: u64,
    /// `S_j`.
    pub active: Vec<usize>,
    /// `S_j \ S_{j+1}`.
    pub eliminated: Vec<usize>,
    /// `B_j`.
    pub budget: u64,
    /// `ln gamma_j`; always `2^ell_j * ln delta_j`.
    pub log_gamma: f64,
    /// `ell_j`: number of squarings so far.
    pub ell: u32,
    /// Pulls attributed to this round, per arm (original and re-pulls).
    pub counts: Vec<u64>,
    pub sums: Vec<f64>,
}

impl EliminationRound {
    /// `p_i^j`: mean of the pulls of `arm` attributed to this round.
    pub fn mean(&self, arm: usize) -> f64 {
        self.sums[arm] / self.counts[arm] as f64
    }

    /// Whether `B_r gamma_j 2^ell_j > B_j`.
    fn triggers(&self, budget_r: u64) -> bool {
        (budget_r as f64).ln() + self.log_gamma + self.ell as f64 * LN_2 > (self.budget as f64).ln()
    }
}

/// Round `r` after its elimination pulls, before the audit has run.
#[derive(Debug, Clone, PartialEq)]
struct PendingRound {
    record: EliminationRound,
    survivors: Vec<usize>,
    leader_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EliminationState {
    delta: f64,
    num_arms: usize,
    round: u32,
    active: Vec<usize>,
    budget: u64,
    history: Vec<EliminationRound>,
    pending: Option<PendingRound>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundOutcome {
    Continue,
    Fallback(usize),
}

/// Pulls needed for a `(eps, ln confidence)` pair: `ceil(32 / eps^2 * ln(2 / confidence))`.
fn pulls_for(epsilon: f64, log_confidence: f64) -> u64 {
    let pulls = (32.0 / (epsilon * epsilon) * (LN_2 - log_confidence)).ceil();
    if pulls >= u64::MAX as f64 {
        u64::MAX
    } else {
        pulls as u64
    }
}

impl EliminationState {
    /// `S_1 = [n]`, `B_0 = 0`, `r = 1`.
    pub fn new(num_arms: usize, delta: f64) -> Self {
        EliminationState {
            delta,
            num_arms,
            round: 1,
            active: (0..num_arms).collect(),
            budget: 0,
            history: Vec::new(),
            pending: None,
        }
    }

    /// Current round `r`.
    pub fn round(&self) -> u32 {
        self.round
    }

    /// `S_r`.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// `B_{r-1}`: elimination pulls of all completed rounds.
    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn history(&self) -> &[EliminationRound] {
        &self.history
    }

    pub fn completed_rounds(&self) -> usize {
        self.history.len()
    }

    /// `eps_r = 2^-r / 4`.
    pub fn epsilon(round: u32) -> f64 {
        0.25 * 0.5f64.powi(round as i32)
    }

    /// `ln delta_r` with `delta_r = delta / (40 pi^2 n r^2)`.
    pub fn log_delta(&self, round: u32) -> f64 {
        let r = round as f64;
        self.delta.ln() - (40.0 * PI * PI * self.num_arms as f64 * r * r).ln()
    }

    /// `d_r = ceil(32 / eps_r^2 ln(2 / delta_r))`.
    pub fn pulls_per_arm(&self, round: u32) -> u64 {
        pulls_for(Self::epsilon(round), self.log_delta(round))
    }

    fn elimination_counts(&self) -> Vec<u64> {
        let d = self.pulls_per_arm(self.round);
        let mut counts = vec![0; self.num_arms];
        for &arm in &self.active {
            counts[arm] = d;
        }
        counts
    }

    fn absorb_elimination(&mut self, outcome: &BatchOutcome, forced: Option<usize>) {
        let r = self.round;
        let epsilon = Self::epsilon(r);
        let d = self.pulls_per_arm(r);
        let mut counts = vec![0; self.num_arms];
        let mut sums = vec![0.0; self.num_arms];
        for &arm in &self.active {
            counts[arm] = d;
            sums[arm] = outcome.sums[arm];
        }
        let mean = |arm: usize| sums[arm] / d as f64;
        // The forced arm is treated as if its round mean came out below every other arm's.
        let target = forced.filter(|&t| r == 1 && self.active.len() > 1 && self.active.contains(&t));
        let contenders: Vec<usize> = self.active.iter().copied().filter(|&arm| Some(arm) != target).collect();
        let mut leader = contenders[0];
        for &arm in &contenders[1..] {
            if mean(arm) > mean(leader) {
                leader = arm;
            }
        }
        let leader_mean = mean(leader);
        let survivors: Vec<usize> = contenders
            .iter()
            .copied()
            .filter(|&arm| mean(arm) >= leader_mean - epsilon)
            .collect();

        let eliminated = self
            .active
            .iter()
            .copied()
            .filter(|arm| !survivors.contains(arm))
            .collect();
        let log_delta = self.log_delta(r);
        self.pending = Some(PendingRound {
            record: EliminationRound {
                index: r,
                epsilon,
                log_delta,
                pulls_per_arm: d,
                active: self.active.clone(),
                eliminated,
                budget: self.budget + d * self.active.len() as u64,
                log_gamma: log_delta,
                ell: 0,
                counts,
                sums,
            },
            survivors,
            leader_mean,
        });
    }

    /// Squares `gamma_j` for every earlier round whose trigger fires against `B_r` and
    /// returns the re-pull increments bringing their eliminated arms to the new totals.
    fn plan_repulls(&mut self, budget_r: u64) -> Vec<u64> {
        let mut counts = vec![0; self.num_arms];
        for past in &mut self.history {
            if past.eliminated.is_empty() || !past.triggers(budget_r) {
                continue;
            }
            past.log_gamma *= 2.0;
            past.ell += 1;
            let target = pulls_for(past.epsilon, past.log_gamma);
            for &arm in &past.eliminated {
                counts[arm] = target.saturating_sub(past.counts[arm]);
            }
        }
        counts
    }

    fn absorb_repulls(&mut self, outcome: &BatchOutcome, repulls: &[u64]) {
        for past in &mut self.history {
            for &arm in &past.eliminated {
                if repulls[arm] > 0 {
                    past.counts[arm] += repulls[arm];
                    past.sums[arm] += outcome.sums[arm];
                }
            }
        }
    }

    /// Fallback test for every earlier round, then commits round `r`.
    fn finish_round(&mut self, env: &mut BatchedEnv) -> Result<RoundOutcome> {
        let pending = self
            .pending
            .take()
            .ok_or_else(|| BaiError::Precondition("no elimination round to audit".into()))?;
        let suspicious = self.history.iter().any(|past| {
            past.eliminated
                .iter()
                .any(|&arm| past.mean(arm) > pending.leader_mean - past.epsilon / 2.0)
        });
        if suspicious {
            let pick = env.choose_index(pending.record.active.len());
            let arm = pending.record.active[pick];
            self.commit(pending);
            return Ok(RoundOutcome::Fallback(arm));
        }
        self.commit(pending);
        Ok(RoundOutcome::Continue)
    }

    fn commit(&mut self, pending: PendingRound) {
        self.budget = pending.record.budget;
        self.active = pending.survivors;
        self.history.push(pending.record);
        self.round += 1;
    }

    fn pending_budget(&self) -> Result<u64> {
        self.pending
            .as_ref()
            .map(|p| p.record.budget)
            .ok_or_else(|| BaiError::Precondition("run successive_elim_round first".into()))
    }

    fn require_idle(&self) -> Result<()> {
        if self.pending.is_some() {
            return Err(BaiError::Precondition(
                "previous round has not been audited yet".into(),
            ));
        }
        if self.active.len() < 2 {
            return Err(BaiError::Precondition("elimination needs |S_r| > 1".into()));
        }
        Ok(())
    }
}

/// Successive elimination for round `r` in its own batch: pulls every arm of `S_r`
/// `d_r` times and drops arms whose round mean trails the round leader by more than
/// `eps_r`. Leaves the round pending until [`check_best_arm_elimination`] runs.
pub fn successive_elim_round(env: &mut BatchedEnv, state: &mut EliminationState) -> Result<()> {
    state.require_idle()?;
    let counts = state.elimination_counts();
    let outcome = env.issue_batch(&counts)?;
    state.absorb_elimination(&outcome, env.forced_elimination_target());
    Ok(())
}

/// The audit for the pending round `r`, with its re-pulls in their own batch.
///
/// Returns the arm picked uniformly from `S_r` when some arm eliminated at an earlier
/// round `j` now looks within `eps_j / 2` of the round leader.
pub fn check_best_arm_elimination(
    env: &mut BatchedEnv,
    state: &mut EliminationState,
) -> Result<Option<usize>> {
    let budget_r = state.pending_budget()?;
    let repulls = state.plan_repulls(budget_r);
    let outcome = env.issue_batch(&repulls)?;
    state.absorb_repulls(&outcome, &repulls);
    Ok(match state.finish_round(env)? {
        RoundOutcome::Fallback(arm) => Some(arm),
        RoundOutcome::Continue => None,
    })
}

/// One while-loop round as a single batch.
///
/// Re-pull sizes depend only on `B_r` and the earlier rounds' `gamma_j`, both known
/// before the round's pulls, so elimination pulls and re-pulls share the batch.
pub fn elimination_round(env: &mut BatchedEnv, state: &mut EliminationState) -> Result<RoundOutcome> {
    state.require_idle()?;
    let mut counts = state.elimination_counts();
    let d = state.pulls_per_arm(state.round);
    let budget_r = state.budget + d * state.active.len() as u64;
    let repulls = state.plan_repulls(budget_r);
    for (c, r) in counts.iter_mut().zip(&repulls) {
        *c += r;
    }
    let outcome = env.issue_batch(&counts)?;
    // Active arms and previously eliminated arms are disjoint, so per-arm sums split cleanly.
    state.absorb_elimination(&outcome, env.forced_elimination_target());
    state.absorb_repulls(&outcome, &repulls);
    state.finish_round(env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{BanditInstance, RewardFamily};

    fn env(means: &[f64], seed: u64) -> BatchedEnv {
        let inst = BanditInstance::new(RewardFamily::Bernoulli, means.to_vec()).unwrap();
        BatchedEnv::new(inst, seed)
    }

    #[test]
    fn first_round_constants() {
        let state = EliminationState::new(10, 0.1);
        assert_eq!(EliminationState::epsilon(1), 0.125);
        let delta_1 = state.log_delta(1).exp();
        assert!((delta_1 - 2.533e-5).abs() < 1e-8);
        let d1 = state.pulls_per_arm(1);
        assert!((23_094..=23_096).contains(&d1), "d_1 = {d1}");
    }

    #[test]
    fn dominant_arm_eliminates_the_other() {
        let mut eliminated = 0;
        for seed in 0..100 {
            let mut e = env(&[0.9, 0.1], seed);
            let mut state = EliminationState::new(2, 0.1);
            successive_elim_round(&mut e, &mut state).unwrap();
            check_best_arm_elimination(&mut e, &mut state).unwrap();
            if state.active() == [0] {
                eliminated += 1;
            }
        }
        assert!(eliminated >= 99);
    }

    #[test]
    fn identical_arms_keep_a_survivor() {
        let mut e = env(&[0.4, 0.4, 0.4], 5);
        let mut state = EliminationState::new(3, 0.1);
        successive_elim_round(&mut e, &mut state).unwrap();
        assert_eq!(check_best_arm_elimination(&mut e, &mut state).unwrap(), None);
        assert!(!state.active().is_empty());
        assert_eq!(state.budget(), 3 * state.pulls_per_arm(1));
    }

    #[test]
    fn budget_accumulates_exactly() {
        let mut e = env(&[0.5, 0.45, 0.45, 0.44], 2);
        let mut state = EliminationState::new(4, 0.1);
        let mut expected = 0;
        for _ in 0..2 {
            let r = state.round();
            expected += state.pulls_per_arm(r) * state.active().len() as u64;
            if elimination_round(&mut e, &mut state).unwrap() != RoundOutcome::Continue {
                break;
            }
            assert_eq!(state.budget(), expected);
            if state.active().len() < 2 {
                break;
            }
        }
    }

    #[test]
    fn inert_audit_without_trigger() {
        let mut e = env(&[0.9, 0.1, 0.1], 3);
        let mut state = EliminationState::new(3, 0.1);
        successive_elim_round(&mut e, &mut state).unwrap();
        check_best_arm_elimination(&mut e, &mut state).unwrap();
        let before = state.history().to_vec();
        let pulls = e.total_pulls();
        // Force a second round on what is left, if anything.
        if state.active().len() > 1 {
            successive_elim_round(&mut e, &mut state).unwrap();
            let round_pulls = e.total_pulls() - pulls;
            check_best_arm_elimination(&mut e, &mut state).unwrap();
            assert_eq!(e.total_pulls() - pulls, round_pulls);
        }
        assert_eq!(state.history()[0].ell, before[0].ell);
        assert_eq!(state.history()[0].log_gamma, before[0].log_gamma);
    }

    #[test]
    fn gamma_squaring_progression() {
        let mut record = EliminationRound {
            index: 1,
            epsilon: 0.125,
            log_delta: -10.0,
            pulls_per_arm: 1,
            active: vec![0, 1],
            eliminated: vec![1],
            budget: 1,
            log_gamma: -10.0,
            ell: 0,
            counts: vec![1, 1],
            sums: vec![1.0, 0.0],
        };
        let mut state = EliminationState::new(2, 0.1);
        state.history.push(record.clone());
        // B_r large enough to fire twice.
        state.plan_repulls(u64::MAX / 2);
        state.plan_repulls(u64::MAX / 2);
        record = state.history[0].clone();
        assert_eq!(record.ell, 2);
        assert_eq!(record.log_gamma, 4.0 * record.log_delta);
    }

    #[test]
    fn audit_requires_pending_round() {
        let mut e = env(&[0.6, 0.4], 0);
        let mut state = EliminationState::new(2, 0.1);
        assert!(check_best_arm_elimination(&mut e, &mut state).is_err());
        successive_elim_round(&mut e, &mut state).unwrap();
        assert!(successive_elim_round(&mut e, &mut state).is_err());
    }

    #[test]
    fn forced_elimination_leads_to_fallback() {
        let mut e = env(&[0.5, 0.3, 0.3], 9).with_forced_best_elimination(true);
        let mut state = EliminationState::new(3, 0.1);
        assert_eq!(elimination_round(&mut e, &mut state).unwrap(), RoundOutcome::Continue);
        assert!(!state.active().contains(&0));
        match elimination_round(&mut e, &mut state).unwrap() {
            RoundOutcome::Fallback(arm) => assert!(arm == 1 || arm == 2),
            other => panic!("expected fallback, got {other:?}"),
        }
    }

    #[test]
    fn forced_elimination_two_arms_keeps_the_other() {
        let mut e = env(&[0.9, 0.1], 1).with_forced_best_elimination(true);
        let mut state = EliminationState::new(2, 0.1);
        elimination_round(&mut e, &mut state).unwrap();
        assert_eq!(state.active(), [1]);
    }
}
