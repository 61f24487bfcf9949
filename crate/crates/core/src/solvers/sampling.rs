//! Random-sampling solver and the sample size that bounds the rank of the
//! best sample within the population of all assignments.
//!
//! With population size `N = ∏ deg(w)` and `p = 1/N`, the probability that
//! the largest of `K` samples ranks no higher than `M = (1-ε)N` is
//! `F(K) = (1-p)^N · (p/(1-p))^K · C(M, K)`. The sample size is the smallest
//! `K` above `(pMe - 1 + p)/(1 - p + ep)` with `F(K) ≤ 1 - δ`.

use std::collections::BTreeMap;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{CandidatePair, Instance, WorkerId};
use crate::objective::{objective, Assignment, ObjectiveVector};
use crate::solvers::dominance::dominance_rank;

pub const DEFAULT_K_CAP: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub epsilon: f64,
    pub delta: f64,
    pub k_hat: u64,
    pub k_cap: u64,
    /// `ln p`, with `p = 1/N`.
    pub log_p: f64,
    /// `ln N`.
    pub log_n: f64,
    /// No `K ≤ k_cap` met the bound; `k_hat` was set to the cap.
    pub cap_hit: bool,
}

impl SamplePlan {
    /// A plan drawing exactly `k` samples, bypassing the bound.
    pub fn fixed(k: u64) -> SamplePlan {
        SamplePlan {
            epsilon: f64::NAN,
            delta: f64::NAN,
            k_hat: k.max(1),
            k_cap: k.max(1),
            log_p: 0.0,
            log_n: 0.0,
            cap_hit: false,
        }
    }

    /// The same plan with `k_hat` multiplied by `factor`, then capped.
    pub fn scaled(&self, factor: u64) -> SamplePlan {
        let k = self.k_hat.saturating_mul(factor);
        SamplePlan { k_hat: k.min(self.k_cap), cap_hit: self.cap_hit || k > self.k_cap, ..*self }
    }
}

/// Population quantities of the bound, in log space.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RankBound {
    log_p: f64,
    /// `ln (1-p)^N`.
    ln_c1: f64,
    /// `ln (p/(1-p))`.
    ln_c2: f64,
    /// `M` when it fits an f64 integer exactly.
    m_exact: Option<u64>,
    ln_m: f64,
}

impl RankBound {
    fn new(deg: &[usize], epsilon: f64) -> RankBound {
        let log_n: f64 = deg.iter().map(|&d| (d as f64).ln()).sum();
        let log_p = -log_n;
        let exact_n = deg.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d as u64)).filter(|&n| n < 1 << 53);
        let p = log_p.exp();
        // N·ln(1-p) with N = 1/p; the series avoids 0/0 once p underflows
        let ln_c1 = if p < 1e-8 { -1.0 - p / 2.0 - p * p / 3.0 } else { (-p).ln_1p() / p };
        let ln_c2 = log_p - (-p).ln_1p();
        let (m_exact, ln_m) = match exact_n {
            Some(n) => {
                let m = ((1.0 - epsilon) * n as f64).floor() as u64;
                (Some(m), (m as f64).ln())
            }
            None => (None, (1.0 - epsilon).ln() + log_n),
        };
        RankBound { log_p, ln_c1, ln_c2, m_exact, ln_m }
    }

    /// `ln F(K)`; `-∞` once `K` exceeds `M`.
    fn ln_f(&self, k: u64) -> f64 {
        if let Some(m) = self.m_exact {
            if k > m {
                return f64::NEG_INFINITY;
            }
        }
        let m = self.ln_m.exp();
        let ln_falling: f64 = (0..k).map(|i| self.ln_m + (-(i as f64) / m).ln_1p()).sum();
        self.ln_c1 + k as f64 * self.ln_c2 + ln_falling - ln_gamma(k as f64 + 1.0)
    }

    /// Smallest admissible `K`: one above the ceiling of the monotonicity bound.
    fn lower_k(&self) -> u64 {
        let p = self.log_p.exp();
        let pm = (self.log_p + self.ln_m).exp();
        let e = std::f64::consts::E;
        let bound = (pm * e - 1.0 + p) / (1.0 - p + e * p);
        (bound.ceil().max(0.0) as u64 + 1).max(1)
    }
}

/// `F(K)`, the probability that the best of `K` samples ranks at most `(1-ε)N`.
pub fn rank_failure_probability(deg: &[usize], epsilon: f64, k: u64) -> f64 {
    RankBound::new(deg, epsilon).ln_f(k).exp()
}

/// Sample size for an `(ε, δ)` rank guarantee, given each worker's number of
/// reachable tasks.
pub fn sample_size(deg: &[usize], epsilon: f64, delta: f64, k_cap: u64) -> Result<SamplePlan> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {delta}")));
    }
    if k_cap == 0 {
        return Err(Error::InvalidConfig("k_cap must be positive".into()));
    }
    if deg.contains(&0) {
        return Err(Error::InvalidConfig("every sampled worker needs at least one reachable task".into()));
    }
    let bound = RankBound::new(deg, epsilon);
    let mut plan = SamplePlan { epsilon, delta, k_hat: 1, k_cap, log_p: bound.log_p, log_n: -bound.log_p, cap_hit: false };
    if plan.log_n == 0.0 {
        // a single possible assignment
        return Ok(plan);
    }
    let target = (1.0 - delta).ln();
    let mut lo = bound.lower_k();
    if lo > k_cap || bound.ln_f(k_cap) > target {
        warn!("sample size bound not met below the cap of {k_cap}");
        plan.k_hat = k_cap;
        plan.cap_hit = true;
        return Ok(plan);
    }
    let mut hi = k_cap;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if bound.ln_f(mid) <= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    plan.k_hat = lo;
    Ok(plan)
}

/// Reachable pairs of each worker, in (worker, task) order.
pub fn pairs_by_worker(pairs: &[CandidatePair]) -> BTreeMap<WorkerId, Vec<CandidatePair>> {
    let mut by: BTreeMap<WorkerId, Vec<CandidatePair>> = BTreeMap::new();
    for p in pairs {
        by.entry(p.worker).or_default().push(*p);
    }
    for v in by.values_mut() {
        v.sort_by_key(|p| p.task);
        v.dedup_by_key(|p| p.task);
    }
    by
}

/// Number of reachable tasks per worker that has any.
pub fn degrees(pairs: &[CandidatePair]) -> Vec<usize> {
    pairs_by_worker(pairs).values().map(Vec::len).collect()
}

/// One sample: every worker takes a uniformly random reachable task.
pub fn draw_sample<R: Rng + ?Sized>(by_worker: &BTreeMap<WorkerId, Vec<CandidatePair>>, rng: &mut R) -> Assignment {
    let mut a = Assignment::new();
    for options in by_worker.values() {
        let pick = options[rng.gen_range(0..options.len())];
        a.insert(pick).expect("workers are distinct map keys");
    }
    a
}

/// Draws `plan.k_hat` samples and returns the one dominating the most others
/// on (min reliability, total diversity); ties go to the earliest sample.
pub fn sampling_solve(instance: &Instance, pairs: &[CandidatePair], plan: &SamplePlan, seed: u64) -> Result<Assignment> {
    let by_worker = pairs_by_worker(pairs);
    if by_worker.is_empty() {
        return Ok(Assignment::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(plan.k_hat as usize);
    let mut scores = Vec::with_capacity(plan.k_hat as usize);
    for _ in 0..plan.k_hat.max(1) {
        let a = draw_sample(&by_worker, &mut rng);
        let ObjectiveVector { min_rel, total_std } = objective(&a, instance)?;
        scores.push((min_rel, total_std));
        samples.push(a);
    }
    let best = dominance_rank(&scores)?;
    Ok(samples.swap_remove(best))
}
