//! Uniform grid over the unit square. Each cell keeps aggregates of its
//! workers and tasks, and a list of destination cells that some worker in the
//! cell may reach; pair retrieval only looks inside listed cells.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{SQRT_2, TAU};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::cost::{estimate_fractal_dimension, solve_cell_size, update_cost};
use crate::model::{
    arc_contains, minimal_arc, normalize_angle, reachability_check, CandidatePair, Point, Task, TaskId, WaitPolicy, Worker,
    WorkerId,
};

/// Slack on angular tests between a cone and a rectangle's angular range.
const ARC_SLACK: f64 = 1e-9;
/// Padding on cell rectangles so floating-point cell membership never
/// places a point outside its rectangle.
const RECT_PAD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CellId {
    pub col: u32,
    pub row: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Rect {
    fn min_distance(&self, other: &Rect) -> f64 {
        let dx = (other.x0 - self.x1).max(self.x0 - other.x1).max(0.0);
        let dy = (other.y0 - self.y1).max(self.y0 - other.y1).max(0.0);
        dx.hypot(dy)
    }

    fn max_distance(&self, other: &Rect) -> f64 {
        let dx = (other.x1 - self.x0).max(self.x1 - other.x0);
        let dy = (other.y1 - self.y0).max(self.y1 - other.y0);
        dx.hypot(dy)
    }

    fn point_distance(&self, p: &Point) -> f64 {
        let dx = (self.x0 - p.x).max(p.x - self.x1).max(0.0);
        let dy = (self.y0 - p.y).max(p.y - self.y1).max(0.0);
        dx.hypot(dy)
    }

    /// Counter-clockwise arc `(lo, width)` covering every direction from
    /// `from` to a point of `self`; `None` when the rectangles touch, so any
    /// direction (or none at all) is possible.
    fn direction_arc(&self, from: &Rect) -> Option<(f64, f64)> {
        let (dx0, dx1) = (self.x0 - from.x1, self.x1 - from.x0);
        let (dy0, dy1) = (self.y0 - from.y1, self.y1 - from.y0);
        if dx0 <= 0.0 && dx1 >= 0.0 && dy0 <= 0.0 && dy1 >= 0.0 {
            return None;
        }
        let corners = [(dx0, dy0), (dx0, dy1), (dx1, dy0), (dx1, dy1)];
        let angles: Vec<f64> = corners.iter().map(|&(x, y)| normalize_angle(y.atan2(x))).collect();
        Some(minimal_arc(&angles))
    }
}

fn arcs_intersect(a: (f64, f64), b: (f64, f64)) -> bool {
    let grow = |(lo, w): (f64, f64)| (normalize_angle(lo - ARC_SLACK), w + 2.0 * ARC_SLACK);
    let (a, b) = (grow(a), grow(b));
    arc_contains(a.0, a.1, b.0) || arc_contains(b.0, b.1, a.0)
}

/// Union of direction cones as one covering arc: the complement of the
/// largest direction no cone contains.
fn covering_arc(cones: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    let mut pieces = Vec::new();
    for (lo, w) in cones {
        if w >= TAU {
            return (0.0, TAU);
        }
        let lo = normalize_angle(lo);
        if lo + w > TAU {
            pieces.push((lo, TAU));
            pieces.push((0.0, lo + w - TAU));
        } else {
            pieces.push((lo, lo + w));
        }
    }
    if pieces.is_empty() {
        return (0.0, 0.0);
    }
    pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (s, e) in pieces {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    // gap after each merged piece, the last one wrapping to the first
    let mut best = (0.0, 0.0);
    for i in 0..merged.len() {
        let end = merged[i].1;
        let next = if i + 1 < merged.len() { merged[i + 1].0 } else { merged[0].0 + TAU };
        if next - end > best.1 {
            best = (next, next - end);
        }
    }
    if best.1 <= 0.0 {
        (0.0, TAU)
    } else {
        (normalize_angle(best.0), TAU - best.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorkerAggregate {
    pub v_min: f64,
    pub v_max: f64,
    /// Arc covering every worker's direction cone.
    pub cone_lo: f64,
    pub cone_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaskAggregate {
    pub s_min: f64,
    pub e_max: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Cell {
    pub tasks: BTreeMap<TaskId, Task>,
    pub workers: BTreeMap<WorkerId, Worker>,
    pub worker_agg: Option<WorkerAggregate>,
    pub task_agg: Option<TaskAggregate>,
    /// Destination cells that may hold a task reachable from this cell.
    pub tcell_list: BTreeSet<CellId>,
}

impl Cell {
    fn refresh_aggregates(&mut self) {
        self.worker_agg = if self.workers.is_empty() {
            None
        } else {
            let ws = self.workers.values();
            let (lo, width) = covering_arc(ws.clone().map(|w| (w.angle_lo, w.cone_width())));
            Some(WorkerAggregate {
                v_min: ws.clone().map(|w| w.velocity).fold(f64::INFINITY, f64::min),
                v_max: ws.map(|w| w.velocity).fold(f64::NEG_INFINITY, f64::max),
                cone_lo: lo,
                cone_width: width,
            })
        };
        self.task_agg = if self.tasks.is_empty() {
            None
        } else {
            Some(TaskAggregate {
                s_min: self.tasks.values().map(|t| t.start).fold(f64::INFINITY, f64::min),
                e_max: self.tasks.values().map(|t| t.end).fold(f64::NEG_INFINITY, f64::max),
            })
        };
    }

    fn is_empty(&self) -> bool {
        self.tasks.is_empty() && self.workers.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostParams {
    pub l_max: f64,
    pub d2: f64,
    pub n: usize,
}

/// Grid index over `[0,1]²` with cells of side `eta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridIndex {
    eta: f64,
    side: u32,
    now: f64,
    policy: WaitPolicy,
    /// Require one exact worker-task hit before linking two cells.
    confirm: bool,
    cost: Option<CostParams>,
    #[serde(serialize_with = "cells_as_list")]
    cells: BTreeMap<CellId, Cell>,
    task_cell: BTreeMap<TaskId, CellId>,
    worker_cell: BTreeMap<WorkerId, CellId>,
}

fn cells_as_list<S: serde::Serializer>(cells: &BTreeMap<CellId, Cell>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(cells.iter())
}

impl GridIndex {
    /// Empty grid with the given cell side.
    pub fn new(eta: f64, now: f64, policy: WaitPolicy) -> Result<GridIndex> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidConfig(format!("cell size must lie in (0, 1), got {eta}")));
        }
        Ok(GridIndex {
            eta,
            side: (1.0 / eta).ceil() as u32,
            now,
            policy,
            confirm: true,
            cost: None,
            cells: BTreeMap::new(),
            task_cell: BTreeMap::new(),
            worker_cell: BTreeMap::new(),
        })
    }

    /// Grid holding the given entities.
    pub fn build(tasks: &[Task], workers: &[Worker], eta: f64, now: f64, policy: WaitPolicy) -> Result<GridIndex> {
        let mut index = GridIndex::new(eta, now, policy)?;
        for t in tasks {
            index.place_task(t.clone())?;
        }
        for w in workers {
            index.place_worker(w.clone())?;
        }
        for cell in index.cells.values_mut() {
            cell.refresh_aggregates();
        }
        index.rebuild_links();
        Ok(index)
    }

    /// Grid whose cell size minimises the update-cost model for the data's
    /// fractal dimension. `L_max` is the farthest any worker could travel
    /// before the last deadline, capped at the square's diagonal.
    pub fn build_auto(tasks: &[Task], workers: &[Worker], now: f64, policy: WaitPolicy) -> Result<GridIndex> {
        let points: Vec<Point> = tasks.iter().map(|t| t.location).chain(workers.iter().map(|w| w.location)).collect();
        let n = points.len();
        let d2 = if n >= 2 { estimate_fractal_dimension(&points)?.d2 } else { 2.0 };
        let horizon = tasks.iter().map(|t| t.end).fold(now, f64::max) - now;
        let v_max = workers.iter().map(|w| w.velocity).fold(0.0, f64::max);
        let l_max = (horizon * v_max).clamp(1e-3, SQRT_2);
        let eta = if n >= 2 { solve_cell_size(l_max, d2, n)?.clamp(1e-3, 0.5) } else { 0.5 };
        let mut index = GridIndex::build(tasks, workers, eta, now, policy)?;
        index.cost = Some(CostParams { l_max, d2, n: n.max(2) });
        Ok(index)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn cost_params(&self) -> Option<CostParams> {
        self.cost
    }

    pub fn set_cost_params(&mut self, params: CostParams) {
        self.cost = Some(params);
    }

    /// Update cost of this grid under its cost model, if one is set.
    pub fn estimate_update_cost(&self) -> Option<f64> {
        self.cost.map(|c| update_cost(c.l_max, self.eta, c.d2, c.n))
    }

    /// Turns the exact-hit confirmation of cell links on or off.
    pub fn set_confirmation(&mut self, on: bool) {
        self.confirm = on;
        self.rebuild_links();
    }

    /// Moves the clock; every cell link is re-derived.
    pub fn set_now(&mut self, now: f64) {
        self.now = now;
        self.rebuild_links();
    }

    pub fn cell(&self, id: CellId) -> Option<&Cell> {
        self.cells.get(&id)
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CellId, &Cell)> {
        self.cells.iter()
    }

    pub fn cell_of(&self, p: &Point) -> CellId {
        let idx = |v: f64| ((v / self.eta).floor().max(0.0) as u32).min(self.side - 1);
        CellId { col: idx(p.x), row: idx(p.y) }
    }

    fn rect(&self, id: CellId) -> Rect {
        let lo = |i: u32| i as f64 * self.eta;
        let hi = |i: u32| ((i + 1) as f64 * self.eta).min(1.0);
        Rect { x0: lo(id.col) - RECT_PAD, y0: lo(id.row) - RECT_PAD, x1: hi(id.col) + RECT_PAD, y1: hi(id.row) + RECT_PAD }
    }

    /// Serialized state; equal for indexes holding the same entities at the
    /// same clock, whatever the mutation history.
    pub fn canonical_form(&self) -> String {
        serde_json::to_string(self).expect("index state is serializable")
    }

    fn place_task(&mut self, task: Task) -> Result<CellId> {
        task.validate()?;
        if self.task_cell.contains_key(&task.id) {
            return Err(Error::DuplicateTask(task.id));
        }
        let id = self.cell_of(&task.location);
        self.task_cell.insert(task.id, id);
        self.cells.entry(id).or_default().tasks.insert(task.id, task);
        Ok(id)
    }

    fn place_worker(&mut self, worker: Worker) -> Result<CellId> {
        worker.validate()?;
        if self.worker_cell.contains_key(&worker.id) {
            return Err(Error::DuplicateWorker(worker.id));
        }
        let id = self.cell_of(&worker.location);
        self.worker_cell.insert(worker.id, id);
        self.cells.entry(id).or_default().workers.insert(worker.id, worker);
        Ok(id)
    }

    /// Whether the cell-level bounds allow a worker of `src` to reach a task of `dst`.
    fn may_reach(&self, src: CellId, dst: CellId) -> bool {
        let (Some(s), Some(d)) = (self.cells.get(&src), self.cells.get(&dst)) else {
            return false;
        };
        let (Some(wa), Some(ta)) = (s.worker_agg, d.task_agg) else {
            return false;
        };
        let (rs, rd) = (self.rect(src), self.rect(dst));
        if self.now + rs.min_distance(&rd) / wa.v_max > ta.e_max {
            return false;
        }
        if self.policy == WaitPolicy::Strict && self.now + rs.max_distance(&rd) / wa.v_min < ta.s_min {
            return false;
        }
        if let Some(arc) = rd.direction_arc(&rs) {
            if !arcs_intersect(arc, (wa.cone_lo, wa.cone_width)) {
                return false;
            }
        }
        if self.confirm {
            return s
                .workers
                .values()
                .any(|w| d.tasks.values().any(|t| reachability_check(w, t, self.now, self.policy).is_some()));
        }
        true
    }

    fn refresh_link(&mut self, src: CellId, dst: CellId) {
        let keep = self.may_reach(src, dst);
        if let Some(cell) = self.cells.get_mut(&src) {
            if keep {
                cell.tcell_list.insert(dst);
            } else {
                cell.tcell_list.remove(&dst);
            }
        }
    }

    fn refresh_links_from(&mut self, src: CellId) {
        let dsts: Vec<CellId> = self.cells.iter().filter(|(_, c)| !c.tasks.is_empty()).map(|(id, _)| *id).collect();
        let list: BTreeSet<CellId> = dsts.into_iter().filter(|d| self.may_reach(src, *d)).collect();
        if let Some(cell) = self.cells.get_mut(&src) {
            cell.tcell_list = list;
        }
    }

    fn refresh_links_to(&mut self, dst: CellId) {
        let srcs: Vec<CellId> = self.cells.iter().filter(|(_, c)| !c.workers.is_empty()).map(|(id, _)| *id).collect();
        for src in srcs {
            self.refresh_link(src, dst);
        }
    }

    fn rebuild_links(&mut self) {
        let ids: Vec<CellId> = self.cells.keys().copied().collect();
        for id in ids {
            self.refresh_links_from(id);
        }
    }

    fn drop_if_empty(&mut self, id: CellId) {
        if self.cells.get(&id).is_some_and(Cell::is_empty) {
            self.cells.remove(&id);
            for cell in self.cells.values_mut() {
                cell.tcell_list.remove(&id);
            }
        }
    }

    pub fn insert_worker(&mut self, worker: Worker) -> Result<()> {
        let id = self.place_worker(worker)?;
        self.cells.get_mut(&id).expect("just placed").refresh_aggregates();
        self.refresh_links_from(id);
        Ok(())
    }

    pub fn remove_worker(&mut self, id: WorkerId) -> Result<Worker> {
        let cid = self.worker_cell.remove(&id).ok_or(Error::UnknownWorker(id))?;
        let cell = self.cells.get_mut(&cid).expect("indexed worker has a cell");
        let w = cell.workers.remove(&id).expect("indexed worker is in its cell");
        cell.refresh_aggregates();
        self.refresh_links_from(cid);
        self.drop_if_empty(cid);
        Ok(w)
    }

    pub fn insert_task(&mut self, task: Task) -> Result<()> {
        let id = self.place_task(task)?;
        self.cells.get_mut(&id).expect("just placed").refresh_aggregates();
        self.refresh_links_to(id);
        Ok(())
    }

    pub fn remove_task(&mut self, id: TaskId) -> Result<Task> {
        let cid = self.task_cell.remove(&id).ok_or(Error::UnknownTask(id))?;
        let cell = self.cells.get_mut(&cid).expect("indexed task has a cell");
        let t = cell.tasks.remove(&id).expect("indexed task is in its cell");
        cell.refresh_aggregates();
        self.refresh_links_to(cid);
        self.drop_if_empty(cid);
        Ok(t)
    }

    pub fn task_count(&self) -> usize {
        self.task_cell.len()
    }

    pub fn worker_count(&self) -> usize {
        self.worker_cell.len()
    }

    /// Every valid pair at the index clock, sorted by (worker, task).
    /// Listed cells are further screened per worker with its own speed and
    /// cone before individual tasks are checked.
    pub fn retrieve_valid_pairs(&self) -> Vec<CandidatePair> {
        let mut out = Vec::new();
        for cell in self.cells.values() {
            if cell.tcell_list.is_empty() {
                continue;
            }
            let targets: Vec<(Rect, &Cell)> = cell.tcell_list.iter().map(|d| (self.rect(*d), &self.cells[d])).collect();
            for w in cell.workers.values() {
                if w.available_at > self.now {
                    continue;
                }
                let cone = (normalize_angle(w.angle_lo), w.cone_width());
                for (rd, dst) in &targets {
                    let agg = dst.task_agg.expect("linked cells hold tasks");
                    if self.now + rd.point_distance(&w.location) / w.velocity > agg.e_max {
                        continue;
                    }
                    let here = Rect { x0: w.location.x, y0: w.location.y, x1: w.location.x, y1: w.location.y };
                    if let Some(arc) = rd.direction_arc(&here) {
                        if !arcs_intersect(arc, cone) {
                            continue;
                        }
                    }
                    for t in dst.tasks.values() {
                        if let Some(p) = reachability_check(w, t, self.now, self.policy) {
                            out.push(p);
                        }
                    }
                }
            }
        }
        out.sort_by_key(|p| (p.worker, p.task));
        out
    }
}
