//! Greedy assignment: one pair per round, chosen by dominance count over
//! (gain of the smallest reliability, gain of expected diversity).

use std::collections::HashMap;

use log::debug;

use crate::diversity::{delta_bounds, std_bounds, DiversityBounds, IncrementalDiversity, TaskView};
use crate::error::{Error, Result};
use crate::model::{CandidatePair, Contribution, Instance, TaskId, WorkerId};
use crate::objective::{task_contributions, Assignment};
use crate::reliability::reliability;
use crate::solvers::dominance::{dominance_rank, prune_mask, PairGain};

/// Most prune survivors evaluated exactly in one round.
pub const SURVIVOR_CAP: usize = 256;

/// Increase of the smallest task reliability if `pair` is added, by full
/// recomputation.
pub fn delta_min_rel(assignment: &Assignment, instance: &Instance, pair: &CandidatePair) -> Result<f64> {
    let per_task = task_contributions(assignment, instance)?;
    let rel = |cs: &[Contribution]| reliability(&cs.iter().map(|c| c.confidence).collect::<Vec<_>>());
    let before = per_task.values().map(|cs| rel(cs)).fold(f64::INFINITY, f64::min);
    let added = instance.contribution(pair)?;
    let after = per_task
        .iter()
        .map(|(id, cs)| {
            if *id == pair.task {
                let mut with = cs.clone();
                with.push(added);
                rel(&with)
            } else {
                rel(cs)
            }
        })
        .fold(f64::INFINITY, f64::min);
    Ok((after - before).max(0.0))
}

struct TaskState {
    contributions: Vec<Contribution>,
    /// `∏(1 - p)` over the task's current workers.
    fail: f64,
    bounds: DiversityBounds,
    diversity: IncrementalDiversity,
    version: u32,
}

#[derive(Clone, Copy)]
struct PairCache {
    version: u32,
    lb: f64,
    ub: f64,
    exact: Option<f64>,
}

/// Round-by-round greedy state. Bounds and exact gains are cached per pair
/// and recomputed only for pairs whose task changed.
pub struct GreedyState<'a> {
    instance: &'a Instance,
    pairs: Vec<CandidatePair>,
    task_of: Vec<usize>,
    contribution: Vec<Contribution>,
    lookup: HashMap<(WorkerId, TaskId), usize>,
    active: Vec<usize>,
    tasks: Vec<TaskState>,
    cache: Vec<Option<PairCache>>,
    assignment: Assignment,
    min_rel: f64,
    argmin: usize,
    second_min: f64,
}

impl<'a> GreedyState<'a> {
    pub fn new(instance: &'a Instance, pairs: &[CandidatePair]) -> Result<Self> {
        let mut pairs = pairs.to_vec();
        pairs.sort_by_key(|p| (p.worker, p.task));
        pairs.dedup_by_key(|p| (p.worker, p.task));
        let mut task_of = Vec::with_capacity(pairs.len());
        let mut contribution = Vec::with_capacity(pairs.len());
        for p in &pairs {
            task_of.push(instance.task_position(p.task).ok_or(Error::UnknownTask(p.task))?);
            contribution.push(instance.contribution(p)?);
        }
        let lookup = pairs.iter().enumerate().map(|(i, p)| ((p.worker, p.task), i)).collect();
        let tasks = instance
            .tasks()
            .iter()
            .map(|t| {
                let contributions = instance.baseline(t.id).to_vec();
                let fail = contributions.iter().map(|c| 1.0 - c.confidence).product();
                let view = TaskView::new(t, &contributions);
                TaskState {
                    bounds: std_bounds(&view),
                    diversity: IncrementalDiversity::new(view),
                    contributions,
                    fail,
                    version: 0,
                }
            })
            .collect();
        let mut state = GreedyState {
            instance,
            active: (0..pairs.len()).collect(),
            cache: vec![None; pairs.len()],
            pairs,
            task_of,
            contribution,
            lookup,
            tasks,
            assignment: Assignment::new(),
            min_rel: 0.0,
            argmin: 0,
            second_min: f64::INFINITY,
        };
        state.refresh_min();
        Ok(state)
    }

    fn refresh_min(&mut self) {
        self.min_rel = f64::INFINITY;
        self.second_min = f64::INFINITY;
        for (i, t) in self.tasks.iter().enumerate() {
            let rel = 1.0 - t.fail;
            if rel < self.min_rel {
                self.second_min = self.min_rel;
                self.min_rel = rel;
                self.argmin = i;
            } else if rel < self.second_min {
                self.second_min = rel;
            }
        }
    }

    fn delta_min_rel_of(&self, idx: usize) -> f64 {
        let t = self.task_of[idx];
        if t != self.argmin {
            return 0.0;
        }
        let after = 1.0 - self.tasks[t].fail * (1.0 - self.contribution[idx].confidence);
        (after.min(self.second_min) - self.min_rel).max(0.0)
    }

    fn task_view_with(&self, idx: usize) -> TaskView {
        let state = &self.tasks[self.task_of[idx]];
        let mut cs = Vec::with_capacity(state.contributions.len() + 1);
        cs.extend_from_slice(&state.contributions);
        cs.push(self.contribution[idx]);
        TaskView::new(&self.instance.tasks()[self.task_of[idx]], &cs)
    }

    fn cached(&mut self, idx: usize) -> PairCache {
        let version = self.tasks[self.task_of[idx]].version;
        match self.cache[idx] {
            Some(c) if c.version == version => c,
            _ => {
                let after = std_bounds(&self.task_view_with(idx));
                let (lb, ub) = delta_bounds(&self.tasks[self.task_of[idx]].bounds, &after);
                let c = PairCache { version, lb, ub, exact: None };
                self.cache[idx] = Some(c);
                c
            }
        }
    }

    fn exact(&mut self, idx: usize) -> f64 {
        let c = self.cached(idx);
        if let Some(e) = c.exact {
            return e;
        }
        let d = &self.tasks[self.task_of[idx]].diversity;
        let e = d.expected_with(&self.contribution[idx]) - d.expected();
        self.cache[idx] = Some(PairCache { exact: Some(e), ..c });
        e
    }

    fn gains_indexed(&mut self) -> Vec<(usize, PairGain)> {
        let active = std::mem::take(&mut self.active);
        let out = active
            .iter()
            .map(|&i| {
                let c = self.cached(i);
                let g = PairGain {
                    pair: self.pairs[i],
                    delta_min_rel: self.delta_min_rel_of(i),
                    lb_delta_std: c.lb,
                    ub_delta_std: c.ub,
                    exact_delta_std: None,
                };
                (i, g)
            })
            .collect();
        self.active = active;
        out
    }

    /// Gains of every pair whose worker is still free, with diversity bounds
    /// but without exact diversity gains. Ordered by (worker, task).
    pub fn gains(&mut self) -> Vec<PairGain> {
        self.gains_indexed().into_iter().map(|(_, g)| g).collect()
    }

    /// Fills in the exact diversity gain of each entry.
    pub fn fill_exact(&mut self, gains: &mut [PairGain]) -> Result<()> {
        for g in gains {
            let idx = *self.lookup.get(&(g.pair.worker, g.pair.task)).ok_or(Error::UnknownWorker(g.pair.worker))?;
            g.exact_delta_std = Some(self.exact(idx));
        }
        Ok(())
    }

    /// Picks this round's pair: prune by bounds, evaluate survivors exactly,
    /// take the dominance-count winner. `None` once no free worker has a pair.
    pub fn select(&mut self) -> Option<PairGain> {
        let gains = self.gains_indexed();
        if gains.is_empty() {
            return None;
        }
        let plain: Vec<PairGain> = gains.iter().map(|(_, g)| *g).collect();
        let keep = prune_mask(&plain);
        let mut survivors: Vec<(usize, PairGain)> = gains.into_iter().zip(keep).filter(|(_, k)| *k).map(|(g, _)| g).collect();
        if survivors.len() > SURVIVOR_CAP {
            debug!("greedy round keeps {SURVIVOR_CAP} of {} prune survivors", survivors.len());
            // the order is total, so the kept set does not depend on the selection algorithm
            survivors.select_nth_unstable_by(SURVIVOR_CAP - 1, |a, b| {
                b.1.delta_min_rel
                    .total_cmp(&a.1.delta_min_rel)
                    .then(b.1.ub_delta_std.total_cmp(&a.1.ub_delta_std))
                    .then(a.0.cmp(&b.0))
            });
            survivors.truncate(SURVIVOR_CAP);
            survivors.sort_by_key(|s| s.0);
        }
        for (i, g) in survivors.iter_mut() {
            g.exact_delta_std = Some(self.exact(*i));
        }
        let points: Vec<(f64, f64)> =
            survivors.iter().map(|(_, g)| (g.delta_min_rel, g.exact_delta_std.unwrap_or(0.0))).collect();
        let winner = dominance_rank(&points).ok()?;
        Some(survivors[winner].1)
    }

    /// Applies a pair: the worker leaves the pool and its task's state and
    /// cached gains are refreshed.
    pub fn commit(&mut self, pair: &CandidatePair) -> Result<()> {
        let idx = *self.lookup.get(&(pair.worker, pair.task)).ok_or(Error::UnknownWorker(pair.worker))?;
        self.assignment.insert(self.pairs[idx])?;
        let t = self.task_of[idx];
        let task = &self.instance.tasks()[t];
        let state = &mut self.tasks[t];
        state.contributions.push(self.contribution[idx]);
        state.fail *= 1.0 - self.contribution[idx].confidence;
        let view = TaskView::new(task, &state.contributions);
        state.bounds = std_bounds(&view);
        state.diversity = IncrementalDiversity::new(view);
        state.version += 1;
        let worker = pair.worker;
        let pairs = &self.pairs;
        self.active.retain(|&i| pairs[i].worker != worker);
        self.refresh_min();
        Ok(())
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn into_assignment(self) -> Assignment {
        self.assignment
    }
}

/// Runs greedy rounds until every worker is placed or no pair remains.
pub fn greedy_solve(instance: &Instance, pairs: &[CandidatePair]) -> Result<Assignment> {
    let mut state = GreedyState::new(instance, pairs)?;
    while let Some(g) = state.select() {
        state.commit(&g.pair)?;
    }
    Ok(state.into_assignment())
}
