//! Dominance counting over two-objective points and the bound-based prune
//! that lets greedy skip most exact diversity evaluations.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::CandidatePair;

/// Above this many points the Fenwick-tree count replaces the quadratic one.
const BRUTE_FORCE_LIMIT: usize = 64;

/// Candidate pair with its reliability gain and diversity-gain interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGain {
    pub pair: CandidatePair,
    /// Increase of the smallest task reliability if the pair is applied.
    pub delta_min_rel: f64,
    pub lb_delta_std: f64,
    pub ub_delta_std: f64,
    /// Exact expected-diversity gain, filled in for prune survivors only.
    pub exact_delta_std: Option<f64>,
}

/// `a` dominates `b`: no worse on both axes, strictly better on one.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 >= b.0 && a.1 >= b.1 && (a.0 > b.0 || a.1 > b.1)
}

/// Number of other points each point dominates, by pairwise comparison.
pub fn dominance_counts_bruteforce(points: &[(f64, f64)]) -> Vec<usize> {
    points.iter().map(|&p| points.iter().filter(|&&q| dominates(p, q)).count()).collect()
}

/// Number of other points each point dominates.
pub fn dominance_counts(points: &[(f64, f64)]) -> Vec<usize> {
    if points.len() <= BRUTE_FORCE_LIMIT {
        return dominance_counts_bruteforce(points);
    }
    // +0.0 folds -0.0 into 0.0 so total_cmp agrees with ==
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x + 0.0, y + 0.0)).collect();
    let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let rank = |y: f64| ys.partition_point(|v| v.total_cmp(&y) == Ordering::Less);

    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| pts[a].0.total_cmp(&pts[b].0).then(pts[a].1.total_cmp(&pts[b].1)));

    let mut tree = vec![0usize; ys.len() + 1];
    let mut counts = vec![0usize; pts.len()];
    let mut i = 0;
    while i < order.len() {
        // all points sharing this x enter the tree before any is counted
        let mut j = i;
        while j < order.len() && pts[order[j]].0 == pts[order[i]].0 {
            let mut k = rank(pts[order[j]].1) + 1;
            while k < tree.len() {
                tree[k] += 1;
                k += k & k.wrapping_neg();
            }
            j += 1;
        }
        // within the x-group, runs of equal y are exact duplicates
        let mut a = i;
        while a < j {
            let mut b = a;
            while b < j && pts[order[b]].1 == pts[order[a]].1 {
                b += 1;
            }
            let mut k = rank(pts[order[a]].1) + 1;
            let mut weakly_below = 0;
            while k > 0 {
                weakly_below += tree[k];
                k -= k & k.wrapping_neg();
            }
            for &idx in &order[a..b] {
                counts[idx] = weakly_below - (b - a);
            }
            a = b;
        }
        i = j;
    }
    counts
}

/// Index of the point dominating the most others. Ties go to the higher
/// x, then the higher y, then the lowest index — callers order points so
/// that the lowest index is the preferred identity.
pub fn dominance_rank(points: &[(f64, f64)]) -> Result<usize> {
    if points.is_empty() {
        return Err(Error::EmptyInput("dominance ranking needs at least one point"));
    }
    let counts = dominance_counts(points);
    let mut best = 0;
    for i in 1..points.len() {
        let better = counts[i]
            .cmp(&counts[best])
            .then(points[i].0.total_cmp(&points[best].0))
            .then(points[i].1.total_cmp(&points[best].1));
        if better == Ordering::Greater {
            best = i;
        }
    }
    Ok(best)
}

/// Drops every gain `q` for which some `p` has `Δmin_rel(p) ≥ Δmin_rel(q)`
/// and `lb(p) > ub(q)`. Such a `p` strictly dominates `q` whatever the exact
/// diversity gains are, so `q` can never win the dominance ranking.
/// Survivors keep their input order. Gains must have `Δmin_rel ≥ 0`.
pub fn dominance_prune(gains: &[PairGain]) -> Vec<PairGain> {
    let keep = prune_mask(gains);
    gains.iter().zip(keep).filter(|(_, k)| *k).map(|(g, _)| *g).collect()
}

#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN bounds must keep the gain
pub(crate) fn prune_mask(gains: &[PairGain]) -> Vec<bool> {
    debug_assert!(gains.iter().all(|g| g.delta_min_rel >= 0.0));
    // Most pairs leave the minimum reliability unchanged, so only the
    // positive-gain ones need ordering; the zero group can be pruned by anyone.
    let mut positive: Vec<usize> = (0..gains.len()).filter(|&i| gains[i].delta_min_rel > 0.0).collect();
    positive.sort_by(|&a, &b| gains[b].delta_min_rel.total_cmp(&gains[a].delta_min_rel));

    let mut keep = vec![true; gains.len()];
    let mut best_lb = f64::NEG_INFINITY;
    let mut i = 0;
    while i < positive.len() {
        let mut j = i;
        while j < positive.len() && gains[positive[j]].delta_min_rel == gains[positive[i]].delta_min_rel {
            best_lb = best_lb.max(gains[positive[j]].lb_delta_std);
            j += 1;
        }
        for &idx in &positive[i..j] {
            keep[idx] = !(best_lb > gains[idx].ub_delta_std);
        }
        i = j;
    }
    let overall_lb = gains.iter().map(|g| g.lb_delta_std).fold(best_lb, f64::max);
    for (k, g) in keep.iter_mut().zip(gains) {
        if g.delta_min_rel <= 0.0 {
            *k = !(overall_lb > g.ub_delta_std);
        }
    }
    keep
}
