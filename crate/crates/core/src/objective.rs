//! Assignments and the two-goal objective: the smallest task reliability and
//! the total expected diversity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diversity::{expected_std_poly, TaskView};
use crate::entropy::expected_std_bruteforce;
use crate::error::{Error, Result};
use crate::model::{CandidatePair, Contribution, Instance, TaskId, WorkerId};
use crate::reliability::reliability;

/// A worker → task mapping; each worker holds at most one pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<CandidatePair>", into = "Vec<CandidatePair>")]
pub struct Assignment {
    pairs: BTreeMap<WorkerId, CandidatePair>,
}

impl From<Vec<CandidatePair>> for Assignment {
    fn from(pairs: Vec<CandidatePair>) -> Self {
        Assignment { pairs: pairs.into_iter().map(|p| (p.worker, p)).collect() }
    }
}

impl From<Assignment> for Vec<CandidatePair> {
    fn from(a: Assignment) -> Self {
        a.pairs.into_values().collect()
    }
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, pair: CandidatePair) -> Result<()> {
        if self.pairs.contains_key(&pair.worker) {
            return Err(Error::WorkerAlreadyAssigned(pair.worker));
        }
        self.pairs.insert(pair.worker, pair);
        Ok(())
    }

    pub fn remove(&mut self, worker: WorkerId) -> Option<CandidatePair> {
        self.pairs.remove(&worker)
    }

    pub fn get(&self, worker: WorkerId) -> Option<&CandidatePair> {
        self.pairs.get(&worker)
    }

    pub fn contains_worker(&self, worker: WorkerId) -> bool {
        self.pairs.contains_key(&worker)
    }

    /// Pairs in worker-id order.
    pub fn pairs(&self) -> impl Iterator<Item = &CandidatePair> + '_ {
        self.pairs.values()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Worker sets per task, each in worker-id order.
    pub fn per_task(&self) -> BTreeMap<TaskId, Vec<CandidatePair>> {
        let mut out: BTreeMap<TaskId, Vec<CandidatePair>> = BTreeMap::new();
        for p in self.pairs.values() {
            out.entry(p.task).or_default().push(*p);
        }
        out
    }

    /// Checks that every pair refers to known entities and appears in `valid`.
    pub fn validate(&self, instance: &Instance, valid: &[CandidatePair]) -> Result<()> {
        let allowed: std::collections::HashSet<(WorkerId, TaskId)> = valid.iter().map(|p| (p.worker, p.task)).collect();
        for p in self.pairs.values() {
            instance.task(p.task).ok_or(Error::UnknownTask(p.task))?;
            instance.worker(p.worker).ok_or(Error::UnknownWorker(p.worker))?;
            if !allowed.contains(&(p.worker, p.task)) {
                return Err(Error::Format(format!("pair ({}, {}) is not reachable", p.worker, p.task)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveVector {
    /// Smallest task reliability; an empty task counts as 0.
    pub min_rel: f64,
    /// Sum of expected diversities.
    pub total_std: f64,
}

/// Per-task contributions (baseline plus assigned workers) for every task of the instance.
pub fn task_contributions(assignment: &Assignment, instance: &Instance) -> Result<BTreeMap<TaskId, Vec<Contribution>>> {
    let mut out: BTreeMap<TaskId, Vec<Contribution>> =
        instance.tasks().iter().map(|t| (t.id, instance.baseline(t.id).to_vec())).collect();
    for p in assignment.pairs() {
        let slot = out.get_mut(&p.task).ok_or(Error::UnknownTask(p.task))?;
        slot.push(instance.contribution(p)?);
    }
    Ok(out)
}

fn evaluate(
    assignment: &Assignment,
    instance: &Instance,
    diversity: impl Fn(TaskId, &[Contribution]) -> Result<f64>,
) -> Result<ObjectiveVector> {
    let per_task = task_contributions(assignment, instance)?;
    let mut min_rel = f64::INFINITY;
    let mut total_std = 0.0;
    for (id, cs) in &per_task {
        let ps: Vec<f64> = cs.iter().map(|c| c.confidence).collect();
        min_rel = min_rel.min(reliability(&ps));
        total_std += diversity(*id, cs)?;
    }
    if per_task.is_empty() {
        min_rel = 0.0;
    }
    Ok(ObjectiveVector { min_rel, total_std })
}

/// Objective of an assignment, with expected diversity from the diversity tables.
pub fn objective(assignment: &Assignment, instance: &Instance) -> Result<ObjectiveVector> {
    evaluate(assignment, instance, |id, cs| {
        let task = instance.task(id).ok_or(Error::UnknownTask(id))?;
        Ok(expected_std_poly(&TaskView::new(task, cs)))
    })
}

/// Objective with expected diversity by possible-world enumeration.
pub fn objective_bruteforce(assignment: &Assignment, instance: &Instance) -> Result<ObjectiveVector> {
    evaluate(assignment, instance, |id, cs| {
        let task = instance.task(id).ok_or(Error::UnknownTask(id))?;
        expected_std_bruteforce(task, cs)
    })
}
