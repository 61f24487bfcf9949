//! Domain types for tasks, workers and candidate task-worker pairs, plus the
//! straight-line reachability test that decides which pairs are valid.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when testing an angle against a direction cone.
pub const ANGLE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorkerId(pub u32);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

impl fmt::Display for WorkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    /// Direction of the vector `other - self`, in `[0, 2π)`. Zero for coincident points.
    pub fn bearing_to(&self, other: &Point) -> f64 {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        if dx == 0.0 && dy == 0.0 {
            return 0.0;
        }
        normalize_angle(dy.atan2(dx))
    }

    pub fn in_unit_square(&self) -> bool {
        (0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Point {
        Point::new(self.x + dx, self.y + dy)
    }
}

/// Maps any finite angle into `[0, 2π)`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Returns true when `theta` lies on the counter-clockwise arc that starts at
/// `lo` and spans `width` radians.
pub fn arc_contains(lo: f64, width: f64, theta: f64) -> bool {
    if width >= TAU - ANGLE_EPS {
        return true;
    }
    let d = normalize_angle(theta - lo);
    d <= width + ANGLE_EPS || d >= TAU - ANGLE_EPS
}

/// Smallest counter-clockwise arc `(lo, width)` containing all angles.
/// Panics on an empty slice.
pub fn minimal_arc(angles: &[f64]) -> (f64, f64) {
    let mut a = angles.to_vec();
    a.sort_by(f64::total_cmp);
    let mut best_gap = a[0] + TAU - a[a.len() - 1];
    let mut start = a[0];
    for w in a.windows(2) {
        if w[1] - w[0] > best_gap {
            best_gap = w[1] - w[0];
            start = w[1];
        }
    }
    (start, TAU - best_gap)
}

/// A located, time-windowed unit of work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub location: Point,
    /// Start of the valid period, in hours.
    pub start: f64,
    /// End of the valid period, in hours.
    pub end: f64,
    /// Weight of spatial against temporal diversity.
    pub beta: f64,
}

impl Task {
    pub fn new(id: TaskId, location: Point, start: f64, end: f64, beta: f64) -> Result<Task> {
        let task = Task { id, location, start, end, beta };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidTask(self.id, msg.to_string()));
        if !self.location.in_unit_square() {
            return bad("location outside [0,1]^2");
        }
        if !(self.start.is_finite() && self.end.is_finite()) || self.start >= self.end {
            return bad("valid period must satisfy start < end");
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad("beta outside [0,1]");
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// A moving agent with a speed, a cone of acceptable travel directions and a
/// success probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Worker {
    pub id: WorkerId,
    pub location: Point,
    /// Space units per hour.
    pub velocity: f64,
    pub angle_lo: f64,
    pub angle_hi: f64,
    pub confidence: f64,
    /// Earliest time the worker can depart; zero for static problems.
    #[serde(default)]
    pub available_at: f64,
}

impl Worker {
    pub fn new(id: WorkerId, location: Point, velocity: f64, angle_lo: f64, angle_hi: f64, confidence: f64) -> Result<Worker> {
        let worker = Worker { id, location, velocity, angle_lo, angle_hi, confidence, available_at: 0.0 };
        worker.validate()?;
        Ok(worker)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidWorker(self.id, msg.to_string()));
        if !self.location.in_unit_square() {
            return bad("location outside [0,1]^2");
        }
        if !(self.velocity.is_finite() && self.velocity > 0.0) {
            return bad("velocity must be positive");
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return bad("confidence outside [0,1]");
        }
        let width = self.cone_width();
        if !(width.is_finite() && width > 0.0 && width <= TAU + 1e-9) {
            return bad("cone width must lie in (0, 2pi]");
        }
        if !self.available_at.is_finite() {
            return bad("available_at must be finite");
        }
        Ok(())
    }

    pub fn cone_width(&self) -> f64 {
        self.angle_hi - self.angle_lo
    }

    /// Whether a travel direction lies inside the worker's cone (wrap-aware).
    pub fn accepts_direction(&self, theta: f64) -> bool {
        arc_contains(normalize_angle(self.angle_lo), self.cone_width(), theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaitPolicy {
    /// Arrival must fall inside the valid period.
    #[default]
    Strict,
    /// Early arrivals wait until the period opens.
    Wait,
}

/// A valid task-worker pair: where and when the worker would do the task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub task: TaskId,
    pub worker: WorkerId,
    /// Arrival time at the task, in hours.
    pub arrival: f64,
    /// Angle of the ray from the task location towards the worker's start.
    pub angle: f64,
}

/// Straight-line reachability of `task` by `worker` departing at `now`.
pub fn reachability_check(worker: &Worker, task: &Task, now: f64, policy: WaitPolicy) -> Option<CandidatePair> {
    if worker.available_at > now {
        return None;
    }
    let dist = worker.location.distance(&task.location);
    if dist > 0.0 {
        let travel = worker.location.bearing_to(&task.location);
        if !worker.accepts_direction(travel) {
            return None;
        }
    }
    let raw = now + dist / worker.velocity;
    let arrival = match policy {
        WaitPolicy::Strict if raw >= task.start && raw <= task.end => raw,
        WaitPolicy::Wait if raw <= task.end => raw.max(task.start),
        _ => return None,
    };
    Some(CandidatePair { task: task.id, worker: worker.id, arrival, angle: task.location.bearing_to(&worker.location) })
}

/// One worker as seen by one task: where it comes from, when it arrives and
/// how likely it is to succeed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub worker: WorkerId,
    pub angle: f64,
    pub arrival: f64,
    pub confidence: f64,
}

/// Tasks and workers of one problem, sorted by id, with optional per-task
/// contributions that already exist before any new assignment is made.
#[derive(Debug, Clone, Default)]
pub struct Instance {
    tasks: Vec<Task>,
    workers: Vec<Worker>,
    task_pos: HashMap<TaskId, usize>,
    worker_pos: HashMap<WorkerId, usize>,
    baseline: BTreeMap<TaskId, Vec<Contribution>>,
}

impl Instance {
    pub fn new(mut tasks: Vec<Task>, mut workers: Vec<Worker>) -> Result<Instance> {
        tasks.sort_by_key(|t| t.id);
        workers.sort_by_key(|w| w.id);
        let mut task_pos = HashMap::with_capacity(tasks.len());
        for (i, t) in tasks.iter().enumerate() {
            t.validate()?;
            if task_pos.insert(t.id, i).is_some() {
                return Err(Error::DuplicateTask(t.id));
            }
        }
        let mut worker_pos = HashMap::with_capacity(workers.len());
        for (i, w) in workers.iter().enumerate() {
            w.validate()?;
            if worker_pos.insert(w.id, i).is_some() {
                return Err(Error::DuplicateWorker(w.id));
            }
        }
        Ok(Instance { tasks, workers, task_pos, worker_pos, baseline: BTreeMap::new() })
    }

    /// Attaches contributions (received answers, in-flight workers) that every
    /// objective evaluation adds on top of the assignment being scored.
    pub fn with_baseline(mut self, baseline: BTreeMap<TaskId, Vec<Contribution>>) -> Result<Self> {
        for id in baseline.keys() {
            if !self.task_pos.contains_key(id) {
                return Err(Error::UnknownTask(*id));
            }
        }
        self.baseline = baseline;
        Ok(self)
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn workers(&self) -> &[Worker] {
        &self.workers
    }

    pub fn task(&self, id: TaskId) -> Option<&Task> {
        self.task_pos.get(&id).map(|&i| &self.tasks[i])
    }

    pub fn worker(&self, id: WorkerId) -> Option<&Worker> {
        self.worker_pos.get(&id).map(|&i| &self.workers[i])
    }

    pub fn task_position(&self, id: TaskId) -> Option<usize> {
        self.task_pos.get(&id).copied()
    }

    pub fn worker_position(&self, id: WorkerId) -> Option<usize> {
        self.worker_pos.get(&id).copied()
    }

    pub fn baseline(&self, id: TaskId) -> &[Contribution] {
        self.baseline.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn baselines(&self) -> &BTreeMap<TaskId, Vec<Contribution>> {
        &self.baseline
    }

    /// The contribution a pair makes to its task.
    pub fn contribution(&self, pair: &CandidatePair) -> Result<Contribution> {
        let worker = self.worker(pair.worker).ok_or(Error::UnknownWorker(pair.worker))?;
        Ok(Contribution { worker: pair.worker, angle: pair.angle, arrival: pair.arrival, confidence: worker.confidence })
    }

    /// Restricts the instance to the given tasks and workers; baselines of
    /// retained tasks are kept.
    pub fn subset(&self, tasks: &[TaskId], workers: &[WorkerId]) -> Instance {
        let t: Vec<Task> = tasks.iter().filter_map(|id| self.task(*id).cloned()).collect();
        let w: Vec<Worker> = workers.iter().filter_map(|id| self.worker(*id).cloned()).collect();
        let mut sub = Instance::new(t, w).expect("subset of a valid instance is valid");
        sub.baseline =
            self.baseline.iter().filter(|(id, _)| sub.task_pos.contains_key(id)).map(|(id, c)| (*id, c.clone())).collect();
        sub
    }
}

/// Every valid pair of the instance by exhaustive all-pairs sweep, sorted by
/// (worker id, task id).
pub fn enumerate_pairs(instance: &Instance, now: f64, policy: WaitPolicy) -> Vec<CandidatePair> {
    let mut out = Vec::new();
    for w in instance.workers() {
        for t in instance.tasks() {
            if let Some(p) = reachability_check(w, t, now, policy) {
                out.push(p);
            }
        }
    }
    out
}

/// Travel direction of the worker heading to the task, the opposite of the
/// approach angle recorded in a pair.
pub fn travel_direction(pair: &CandidatePair) -> f64 {
    normalize_angle(pair.angle + PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worker_at(x: f64, y: f64, lo: f64, hi: f64) -> Worker {
        Worker::new(WorkerId(1), Point::new(x, y), 1.0, lo, hi, 0.9).unwrap()
    }

    fn task_at(x: f64, y: f64, s: f64, e: f64) -> Task {
        Task::new(TaskId(1), Point::new(x, y), s, e, 0.5).unwrap()
    }

    #[test]
    fn reachable_three_four_five() {
        let w = worker_at(0.0, 0.0, 0.5, 1.5);
        let t = task_at(0.6, 0.8, 0.9, 1.1);
        let pair = reachability_check(&w, &t, 0.0, WaitPolicy::Strict).unwrap();
        assert!((pair.arrival - 1.0).abs() < 1e-12);
        assert!((travel_direction(&pair) - 0.8f64.atan2(0.6)).abs() < 1e-12);
    }

    #[test]
    fn opposite_direction_rejected() {
        let w = worker_at(0.8, 0.8, 0.5, 1.5);
        let t = task_at(0.2, 0.2, 0.0, 24.0);
        assert!(reachability_check(&w, &t, 0.0, WaitPolicy::Strict).is_none());
        assert!(reachability_check(&w, &t, 0.0, WaitPolicy::Wait).is_none());
    }

    #[test]
    fn wait_policy_boundary() {
        // distance 0.5 at unit speed: raw arrival 0.5 before a [1,2] window
        let w = worker_at(0.0, 0.0, -0.1, 0.1);
        let t = task_at(0.5, 0.0, 1.0, 2.0);
        assert!(reachability_check(&w, &t, 0.0, WaitPolicy::Strict).is_none());
        let pair = reachability_check(&w, &t, 0.0, WaitPolicy::Wait).unwrap();
        assert_eq!(pair.arrival, 1.0);
    }

    #[test]
    fn co_located_worker_passes_direction() {
        let w = worker_at(0.3, 0.3, 1.0, 1.1);
        let t = task_at(0.3, 0.3, 0.0, 1.0);
        let pair = reachability_check(&w, &t, 0.0, WaitPolicy::Strict).unwrap();
        assert_eq!(pair.arrival, 0.0);
    }

    #[test]
    fn cone_wraps_past_two_pi() {
        // cone [350deg, 370deg] accepts travel due east (0 rad)
        let lo = 350f64.to_radians();
        let w = worker_at(0.2, 0.5, lo, lo + 20f64.to_radians());
        let t = task_at(0.6, 0.5, 0.0, 10.0);
        assert!(reachability_check(&w, &t, 0.0, WaitPolicy::Strict).is_some());
    }

    #[test]
    fn unavailable_worker_cannot_depart() {
        let mut w = worker_at(0.0, 0.0, 0.0, TAU);
        w.available_at = 3.0;
        let t = task_at(0.1, 0.0, 0.0, 24.0);
        assert!(reachability_check(&w, &t, 1.0, WaitPolicy::Wait).is_none());
        assert!(reachability_check(&w, &t, 3.0, WaitPolicy::Wait).is_some());
    }

    #[test]
    fn validation_rejects_bad_entities() {
        assert!(Task::new(TaskId(0), Point::new(0.5, 0.5), 2.0, 1.0, 0.5).is_err());
        assert!(Task::new(TaskId(0), Point::new(1.5, 0.5), 0.0, 1.0, 0.5).is_err());
        assert!(Task::new(TaskId(0), Point::new(0.5, 0.5), 0.0, 1.0, 1.5).is_err());
        assert!(Worker::new(WorkerId(0), Point::new(0.5, 0.5), 0.0, 0.0, 1.0, 0.5).is_err());
        assert!(Worker::new(WorkerId(0), Point::new(0.5, 0.5), 1.0, 1.0, 1.0, 0.5).is_err());
        assert!(Worker::new(WorkerId(0), Point::new(0.5, 0.5), 1.0, 0.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn instance_rejects_duplicates() {
        let t = task_at(0.1, 0.1, 0.0, 1.0);
        assert!(matches!(Instance::new(vec![t.clone(), t], vec![]), Err(Error::DuplicateTask(_))));
    }
}
