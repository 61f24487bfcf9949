//! Divide and conquer: split the tasks in two by 2-means on their locations,
//! solve each side recursively, and reconcile workers assigned on both sides.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diversity::{expected_std_poly, TaskView};
use crate::error::{Error, Result};
use crate::model::{CandidatePair, Contribution, Instance, Point, TaskId, WorkerId};
use crate::objective::Assignment;
use crate::reliability::reliability;
use crate::solvers::dominance::dominance_rank;
use crate::solvers::greedy::greedy_solve;
use crate::solvers::sampling::{degrees, sample_size, sampling_solve, DEFAULT_K_CAP};

const KMEANS_MAX_ITER: usize = 50;
/// A side holding more than this share of tasks triggers the median split.
const MAX_SIDE_SHARE: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubSolver {
    Greedy,
    Sampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcConfig {
    /// Subproblems with at most this many tasks are solved directly.
    pub gamma: usize,
    pub sub_solver: SubSolver,
    /// Largest group of dependent conflicting workers resolved exhaustively.
    pub dcw_cap: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub k_cap: u64,
    /// Multiplier on each sampled subproblem's sample size.
    pub sample_factor: u64,
}

impl Default for DcConfig {
    fn default() -> Self {
        DcConfig {
            gamma: 8,
            sub_solver: SubSolver::Sampling,
            dcw_cap: 20,
            seed: 0,
            epsilon: 0.1,
            delta: 0.9,
            k_cap: DEFAULT_K_CAP,
            sample_factor: 1,
        }
    }
}

impl DcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma < 2 {
            return Err(Error::InvalidConfig(format!("gamma must be at least 2, got {}", self.gamma)));
        }
        if self.dcw_cap < 1 {
            return Err(Error::InvalidConfig("dcw_cap must be at least 1".into()));
        }
        if self.sample_factor < 1 {
            return Err(Error::InvalidConfig("sample_factor must be at least 1".into()));
        }
        Ok(())
    }
}

/// One half of a split problem.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Side {
    pub tasks: Vec<TaskId>,
    pub workers: Vec<WorkerId>,
    pub pairs: Vec<CandidatePair>,
}

/// Workers assigned on both sides, linked when they share an assigned task.
#[derive(Debug, Clone, PartialEq)]
pub struct ConflictGroup {
    /// Sorted by id.
    pub workers: Vec<WorkerId>,
    /// Tasks the group's workers are assigned to on either side.
    pub tasks: Vec<TaskId>,
}

impl ConflictGroup {
    /// A lone conflicting worker is independent; larger groups are dependent.
    pub fn is_independent(&self) -> bool {
        self.workers.len() == 1
    }
}

fn two_means<R: Rng>(points: &[Point], rng: &mut R) -> Vec<bool> {
    let n = points.len();
    let first = rng.gen_range(0..n);
    let mut second = rng.gen_range(0..n - 1);
    if second >= first {
        second += 1;
    }
    let mut centers = [points[first], points[second]];
    let mut side = vec![false; n];
    for _ in 0..KMEANS_MAX_ITER {
        let next: Vec<bool> = points.iter().map(|p| p.distance(&centers[1]) < p.distance(&centers[0])).collect();
        let changed = next != side;
        side = next;
        for (c, flag) in centers.iter_mut().zip([false, true]) {
            let members: Vec<&Point> = points.iter().zip(&side).filter(|(_, s)| **s == flag).map(|(p, _)| p).collect();
            if !members.is_empty() {
                let k = members.len() as f64;
                *c = Point::new(members.iter().map(|p| p.x).sum::<f64>() / k, members.iter().map(|p| p.y).sum::<f64>() / k);
            }
        }
        if !changed {
            break;
        }
    }
    side
}

fn median_split(tasks: &[(TaskId, Point)]) -> Vec<bool> {
    let var = |f: fn(&Point) -> f64| {
        let mean = tasks.iter().map(|(_, p)| f(p)).sum::<f64>() / tasks.len() as f64;
        tasks.iter().map(|(_, p)| (f(p) - mean).powi(2)).sum::<f64>()
    };
    let axis: fn(&Point) -> f64 = if var(|p| p.y) > var(|p| p.x) { |p| p.y } else { |p| p.x };
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by(|&a, &b| axis(&tasks[a].1).total_cmp(&axis(&tasks[b].1)).then(tasks[a].0.cmp(&tasks[b].0)));
    let mut side = vec![false; tasks.len()];
    for &i in &order[tasks.len() / 2..] {
        side[i] = true;
    }
    side
}

/// Splits tasks into two spatial clusters. Workers reaching both sides are
/// copied into each; pair lists are restricted to each side's tasks.
pub fn bg_partition<R: Rng>(instance: &Instance, tasks: &[TaskId], pairs: &[CandidatePair], rng: &mut R) -> Result<(Side, Side)> {
    if tasks.len() < 2 {
        return Err(Error::InvalidConfig(format!("cannot split {} task(s)", tasks.len())));
    }
    let located: Vec<(TaskId, Point)> = tasks
        .iter()
        .map(|id| instance.task(*id).map(|t| (*id, t.location)).ok_or(Error::UnknownTask(*id)))
        .collect::<Result<_>>()?;
    let points: Vec<Point> = located.iter().map(|(_, p)| *p).collect();
    let mut side = two_means(&points, rng);
    let ones = side.iter().filter(|s| **s).count();
    let share = ones.max(side.len() - ones) as f64 / side.len() as f64;
    if ones == 0 || ones == side.len() || share > MAX_SIDE_SHARE {
        side = median_split(&located);
    }
    let side_of: HashMap<TaskId, bool> = located.iter().zip(&side).map(|((id, _), s)| (*id, *s)).collect();
    let mut halves = (Side::default(), Side::default());
    for ((id, _), s) in located.iter().zip(&side) {
        if *s { &mut halves.1 } else { &mut halves.0 }.tasks.push(*id);
    }
    for p in pairs {
        match side_of.get(&p.task) {
            Some(false) => halves.0.pairs.push(*p),
            Some(true) => halves.1.pairs.push(*p),
            None => {}
        }
    }
    for h in [&mut halves.0, &mut halves.1] {
        let ws: BTreeSet<WorkerId> = h.pairs.iter().map(|p| p.worker).collect();
        h.workers = ws.into_iter().collect();
    }
    Ok(halves)
}

/// Groups of workers assigned in both sub-assignments.
pub fn conflict_groups(sub1: &Assignment, sub2: &Assignment) -> Vec<ConflictGroup> {
    let conflicting: Vec<WorkerId> = sub1.pairs().map(|p| p.worker).filter(|w| sub2.contains_worker(*w)).collect();
    let mut parent: Vec<usize> = (0..conflicting.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut owner: HashMap<TaskId, usize> = HashMap::new();
    for (i, w) in conflicting.iter().enumerate() {
        for sub in [sub1, sub2] {
            let t = sub.get(*w).expect("conflicting workers are in both").task;
            if let Some(&j) = owner.get(&t) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            } else {
                owner.insert(t, i);
            }
        }
    }
    let mut groups: BTreeMap<usize, ConflictGroup> = BTreeMap::new();
    for (i, w) in conflicting.iter().enumerate() {
        let root = find(&mut parent, i);
        let g = groups.entry(root).or_insert(ConflictGroup { workers: Vec::new(), tasks: Vec::new() });
        g.workers.push(*w);
        g.tasks.push(sub1.get(*w).unwrap().task);
        g.tasks.push(sub2.get(*w).unwrap().task);
    }
    let mut out: Vec<ConflictGroup> = groups.into_values().collect();
    for g in &mut out {
        g.tasks.sort();
        g.tasks.dedup();
    }
    out.sort_by(|a, b| a.workers[0].cmp(&b.workers[0]));
    out
}

/// Scores keep-choices for one conflict group against the merged state.
struct GroupScorer<'a> {
    instance: &'a Instance,
    /// Baseline plus currently fixed pairs, per task of the group.
    fixed: BTreeMap<TaskId, Vec<Contribution>>,
    /// Smallest reliability over the tasks outside the group.
    rest_min_rel: f64,
}

impl GroupScorer<'_> {
    /// Reliability and expected diversity of one group task with `extra` added.
    fn task_score<'p>(&self, id: TaskId, extra: impl Iterator<Item = &'p CandidatePair>) -> Result<(f64, f64)> {
        let mut cs = self.fixed.get(&id).ok_or(Error::UnknownTask(id))?.clone();
        for p in extra {
            cs.push(self.instance.contribution(p)?);
        }
        let task = self.instance.task(id).ok_or(Error::UnknownTask(id))?;
        let rel = reliability(&cs.iter().map(|c| c.confidence).collect::<Vec<_>>());
        Ok((rel, expected_std_poly(&TaskView::new(task, &cs))))
    }

    fn score(&self, chosen: &[CandidatePair]) -> Result<(f64, f64)> {
        let mut min_rel = self.rest_min_rel;
        let mut total = 0.0;
        for id in self.fixed.keys() {
            let (rel, std) = self.task_score(*id, chosen.iter().filter(|p| p.task == *id))?;
            min_rel = min_rel.min(rel);
            total += std;
        }
        Ok((min_rel, total))
    }

    /// Scores of all `2^k` keep-choices. A task's score depends only on the
    /// choices of the workers that can land on it, so it is memoised on those bits.
    fn score_all(&self, options: &[[CandidatePair; 2]]) -> Result<Vec<(f64, f64)>> {
        let tasks: Vec<(TaskId, u64)> = self
            .fixed
            .keys()
            .map(|id| {
                let bits = options
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| o[0].task == *id || o[1].task == *id)
                    .fold(0u64, |acc, (i, _)| acc | 1 << i);
                (*id, bits)
            })
            .collect();
        let mut memo: Vec<HashMap<u64, (f64, f64)>> = vec![HashMap::new(); tasks.len()];
        let mut scores = Vec::with_capacity(1 << options.len());
        for mask in 0u64..1 << options.len() {
            let mut min_rel = self.rest_min_rel;
            let mut total = 0.0;
            for (k, &(id, bits)) in tasks.iter().enumerate() {
                let key = mask & bits;
                let (rel, std) = match memo[k].get(&key) {
                    Some(v) => *v,
                    None => {
                        let chosen =
                            options.iter().enumerate().map(|(i, o)| &o[(mask >> i & 1) as usize]).filter(|p| p.task == id);
                        let v = self.task_score(id, chosen)?;
                        memo[k].insert(key, v);
                        v
                    }
                };
                min_rel = min_rel.min(rel);
                total += std;
            }
            scores.push((min_rel, total));
        }
        Ok(scores)
    }
}

fn scorer_for<'a>(instance: &'a Instance, merged: &Assignment, group_tasks: &[TaskId]) -> Result<GroupScorer<'a>> {
    let mut per_task: BTreeMap<TaskId, Vec<Contribution>> =
        instance.tasks().iter().map(|t| (t.id, instance.baseline(t.id).to_vec())).collect();
    for p in merged.pairs() {
        per_task.get_mut(&p.task).ok_or(Error::UnknownTask(p.task))?.push(instance.contribution(p)?);
    }
    let inside: BTreeSet<TaskId> = group_tasks.iter().copied().collect();
    let rest_min_rel = per_task
        .iter()
        .filter(|(id, _)| !inside.contains(id))
        .map(|(_, cs)| reliability(&cs.iter().map(|c| c.confidence).collect::<Vec<_>>()))
        .fold(f64::INFINITY, f64::min);
    let fixed = per_task.into_iter().filter(|(id, _)| inside.contains(id)).collect();
    Ok(GroupScorer { instance, fixed, rest_min_rel })
}

/// Merges two side assignments so that each worker keeps one copy.
/// Non-conflicting pairs pass through unchanged. Each conflict group picks
/// its keep-sides by enumerating all `2^k` choices (side 1 first) and taking
/// the dominance winner on (min reliability, total diversity); groups larger
/// than `dcw_cap` are resolved one worker at a time.
pub fn sa_merge(sub1: &Assignment, sub2: &Assignment, instance: &Instance, dcw_cap: usize) -> Result<Assignment> {
    let groups = conflict_groups(sub1, sub2);
    let mut merged = Assignment::new();
    for sub in [sub1, sub2] {
        for p in sub.pairs() {
            if !(sub1.contains_worker(p.worker) && sub2.contains_worker(p.worker)) {
                merged.insert(*p)?;
            }
        }
    }
    for g in &groups {
        let options: Vec<[CandidatePair; 2]> =
            g.workers.iter().map(|w| [*sub1.get(*w).unwrap(), *sub2.get(*w).unwrap()]).collect();
        if g.workers.len() <= dcw_cap {
            let scores = scorer_for(instance, &merged, &g.tasks)?.score_all(&options)?;
            let best = dominance_rank(&scores)? as u64;
            for (i, o) in options.iter().enumerate() {
                merged.insert(o[(best >> i & 1) as usize])?;
            }
        } else {
            warn!("conflict group of {} workers exceeds the cap of {dcw_cap}; resolving one at a time", g.workers.len());
            for o in &options {
                let scorer = scorer_for(instance, &merged, &g.tasks)?;
                let scores = [scorer.score(&o[..1])?, scorer.score(&o[1..])?];
                merged.insert(o[dominance_rank(&scores)?])?;
            }
        }
    }
    Ok(merged)
}

fn child_seed(seed: u64, branch: u64) -> u64 {
    // splitmix64 step keeps sibling streams apart
    let mut z = seed ^ branch.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn solve_base(instance: &Instance, pairs: &[CandidatePair], cfg: &DcConfig, seed: u64) -> Result<Assignment> {
    match cfg.sub_solver {
        SubSolver::Greedy => greedy_solve(instance, pairs),
        SubSolver::Sampling => {
            let deg = degrees(pairs);
            let plan = sample_size(&deg, cfg.epsilon, cfg.delta, cfg.k_cap)?.scaled(cfg.sample_factor);
            sampling_solve(instance, pairs, &plan, seed)
        }
    }
}

fn solve_rec(instance: &Instance, pairs: &[CandidatePair], cfg: &DcConfig, seed: u64) -> Result<Assignment> {
    let tasks: Vec<TaskId> = instance.tasks().iter().map(|t| t.id).collect();
    if tasks.len() <= cfg.gamma {
        return solve_base(instance, pairs, cfg, seed);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (s1, s2) = bg_partition(instance, &tasks, pairs, &mut rng)?;
    let a1 = solve_rec(&instance.subset(&s1.tasks, &s1.workers), &s1.pairs, cfg, child_seed(seed, 1))?;
    let a2 = solve_rec(&instance.subset(&s2.tasks, &s2.workers), &s2.pairs, cfg, child_seed(seed, 2))?;
    sa_merge(&a1, &a2, instance, cfg.dcw_cap)
}

/// Divide-and-conquer solve over all tasks of the instance.
pub fn dc_solve(instance: &Instance, pairs: &[CandidatePair], cfg: &DcConfig) -> Result<Assignment> {
    cfg.validate()?;
    solve_rec(instance, pairs, cfg, cfg.seed)
}

/// Reference solution: divide and conquer with sampled subproblems using
/// ten times the bounded sample size.
pub fn gtruth_solve(instance: &Instance, pairs: &[CandidatePair], cfg: &DcConfig) -> Result<Assignment> {
    let cfg = DcConfig { sub_solver: SubSolver::Sampling, sample_factor: cfg.sample_factor * 10, ..*cfg };
    dc_solve(instance, pairs, &cfg)
}
