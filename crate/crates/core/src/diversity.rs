//! Expected spatial/temporal diversity in polynomial time.
//!
//! A worker set of size `r` has `2^r` possible worlds, but the entropy of a
//! world is a sum over the arcs (or intervals) between *consecutive*
//! surviving workers. Every arc is therefore counted in exactly those worlds
//! where its two bounding workers succeed and everyone strictly between them
//! fails, which gives one table entry per bounding pair:
//!
//! * spatial table, `r × r`: entry `[j][k]` is the entropy of the arc that runs
//!   counter-clockwise from worker `j` to worker `k`, weighted by
//!   `p_j · p_k · ∏(1 - p_x)` over the workers strictly inside the arc. The
//!   diagonal (a lone survivor owning the full circle) is zero.
//! * temporal table, `(r+1) × (r+1)`: entry `[a][b]` (`a ≤ b`) is the entropy
//!   of the merged interval `I_{a+1} ∪ … ∪ I_{b+1}`. Its bounding events are
//!   arrival `a` (or the period start when `a = 0`) and arrival `b + 1` (or the
//!   period end when `b = r`); the two period boundaries always "succeed".
//!
//! Summing a table gives the expected SD (resp. TD) exactly.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::entropy::entropy_term;
use crate::error::Result;
use crate::model::{CandidatePair, Contribution, Instance, Task};

/// A task together with the workers assigned to it, ordered both by approach
/// angle and by arrival time.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskView {
    pub start: f64,
    pub end: f64,
    pub beta: f64,
    /// `(angle, confidence)` sorted by angle, ties by worker id.
    pub by_angle: Vec<(f64, f64)>,
    /// Cyclic gaps; `gaps[x]` runs from `by_angle[x]` to the next angle.
    pub gaps: Vec<f64>,
    /// `(arrival, confidence)` sorted by arrival, ties by worker id.
    pub by_arrival: Vec<(f64, f64)>,
    /// `r + 1` sub-intervals of the valid period.
    pub intervals: Vec<f64>,
}

impl TaskView {
    pub fn new(task: &Task, contributions: &[Contribution]) -> TaskView {
        let mut angle_order: Vec<&Contribution> = contributions.iter().collect();
        angle_order.sort_by(|a, b| a.angle.total_cmp(&b.angle).then(a.worker.cmp(&b.worker)));
        let by_angle: Vec<(f64, f64)> = angle_order.iter().map(|c| (c.angle, c.confidence)).collect();
        let r = by_angle.len();
        let gaps = (0..r)
            .map(|x| if x + 1 < r { by_angle[x + 1].0 - by_angle[x].0 } else { by_angle[0].0 + TAU - by_angle[x].0 })
            .collect();

        let mut time_order: Vec<&Contribution> = contributions.iter().collect();
        time_order.sort_by(|a, b| a.arrival.total_cmp(&b.arrival).then(a.worker.cmp(&b.worker)));
        let by_arrival: Vec<(f64, f64)> =
            time_order.iter().map(|c| (c.arrival.clamp(task.start, task.end), c.confidence)).collect();
        let mut intervals = Vec::with_capacity(r + 1);
        let mut prev = task.start;
        for &(a, _) in &by_arrival {
            intervals.push(a - prev);
            prev = a;
        }
        intervals.push(task.end - prev);

        TaskView { start: task.start, end: task.end, beta: task.beta, by_angle, gaps, by_arrival, intervals }
    }

    /// View of the workers a set of pairs sends to `task`.
    pub fn from_pairs(task: &Task, pairs: &[CandidatePair], instance: &Instance) -> Result<TaskView> {
        let contributions =
            pairs.iter().filter(|p| p.task == task.id).map(|p| instance.contribution(p)).collect::<Result<Vec<_>>>()?;
        Ok(TaskView::new(task, &contributions))
    }

    pub fn len(&self) -> usize {
        self.by_angle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_angle.is_empty()
    }

    fn span(&self) -> f64 {
        self.end - self.start
    }

    /// Arc counter-clockwise from worker `j` to worker `k`, as a fraction of the circle.
    fn arc_fraction(&self, j: usize, k: usize) -> f64 {
        let d = self.by_angle[k].0 - self.by_angle[j].0;
        (if k > j { d } else { d + TAU }) / TAU
    }

    fn event_time(&self, e: usize) -> f64 {
        match e {
            0 => self.start,
            e if e == self.len() + 1 => self.end,
            e => self.by_arrival[e - 1].0,
        }
    }

    fn event_prob(&self, e: usize) -> f64 {
        if e == 0 || e == self.len() + 1 {
            1.0
        } else {
            self.by_arrival[e - 1].1
        }
    }

    fn for_each_sd_entry(&self, term: impl Fn(usize, usize) -> f64, mut f: impl FnMut(usize, usize, f64)) {
        let r = self.len();
        if r < 2 {
            return;
        }
        for j in 0..r {
            let pj = self.by_angle[j].1;
            if pj == 0.0 {
                continue;
            }
            let mut inside_fail = 1.0;
            for step in 1..r {
                let k = (j + step) % r;
                let pk = self.by_angle[k].1;
                f(j, k, term(j, k) * pj * pk * inside_fail);
                inside_fail *= 1.0 - pk;
                if inside_fail == 0.0 {
                    break;
                }
            }
        }
    }

    // events: 0 = period start, 1..=r arrivals, r+1 = period end
    fn for_each_td_entry(&self, term: impl Fn(usize, usize) -> f64, mut f: impl FnMut(usize, usize, f64)) {
        let r = self.len();
        if r == 0 {
            return;
        }
        for a in 0..=r {
            let pa = self.event_prob(a);
            if pa == 0.0 {
                continue;
            }
            let mut inside_fail = 1.0;
            for b in a + 1..=r + 1 {
                let pb = self.event_prob(b);
                f(a, b - 1, term(a, b) * pa * pb * inside_fail);
                inside_fail *= 1.0 - pb;
                if inside_fail == 0.0 {
                    break;
                }
            }
        }
    }

    fn sd_term(&self, j: usize, k: usize) -> f64 {
        entropy_term(self.arc_fraction(j, k))
    }

    fn td_term(&self, a: usize, b: usize) -> f64 {
        entropy_term((self.event_time(b) - self.event_time(a)) / self.span())
    }

    /// Expected spatial diversity, `Σ M_SD`.
    pub fn expected_sd(&self) -> f64 {
        let mut total = 0.0;
        self.for_each_sd_entry(|j, k| self.sd_term(j, k), |_, _, v| total += v);
        total
    }

    /// Expected temporal diversity, `Σ M_TD`.
    pub fn expected_td(&self) -> f64 {
        let mut total = 0.0;
        self.for_each_td_entry(|a, b| self.td_term(a, b), |_, _, v| total += v);
        total
    }

    /// Diversity of the world where every worker succeeds.
    pub fn full_std(&self) -> f64 {
        let sd = if self.len() >= 2 { self.gaps.iter().map(|g| entropy_term(g / TAU)).sum() } else { 0.0 };
        let span = self.span();
        let td: f64 = if self.is_empty() { 0.0 } else { self.intervals.iter().map(|i| entropy_term(i / span)).sum() };
        self.beta * sd + (1.0 - self.beta) * td
    }
}

/// The `r × r` spatial diversity table.
pub fn msd_matrix(view: &TaskView) -> Vec<Vec<f64>> {
    let r = view.len();
    let mut m = vec![vec![0.0; r]; r];
    view.for_each_sd_entry(|j, k| view.sd_term(j, k), |j, k, v| m[j][k] = v);
    m
}

/// The `(r+1) × (r+1)` temporal diversity table; entries below the diagonal are zero.
pub fn mtd_matrix(view: &TaskView) -> Vec<Vec<f64>> {
    let r = view.len();
    let mut m = vec![vec![0.0; r + 1]; r + 1];
    view.for_each_td_entry(|a, b| view.td_term(a, b), |a, b, v| m[a][b] = v);
    m
}

/// `E(STD) = β·ΣM_SD + (1-β)·ΣM_TD`.
pub fn expected_std_poly(view: &TaskView) -> f64 {
    if view.is_empty() {
        return 0.0;
    }
    let sd = if view.beta > 0.0 { view.expected_sd() } else { 0.0 };
    let td = if view.beta < 1.0 { view.expected_td() } else { 0.0 };
    view.beta * sd + (1.0 - view.beta) * td
}

/// Expected diversity of a fixed worker set plus any one extra worker.
///
/// The entropy of an arc or merged interval depends only on its two bounding
/// workers, so terms between existing workers are computed once; evaluating
/// a candidate only adds the terms that involve it.
#[derive(Debug, Clone)]
pub struct IncrementalDiversity {
    view: TaskView,
    /// `r × r` spatial terms, row-major.
    sd_terms: Vec<f64>,
    /// `(r+2) × (r+2)` temporal terms over events (period start, arrivals, period end).
    td_terms: Vec<f64>,
    expected: f64,
}

impl IncrementalDiversity {
    pub fn new(view: TaskView) -> IncrementalDiversity {
        let r = view.len();
        let mut sd_terms = vec![0.0; r * r];
        if view.beta > 0.0 {
            for j in 0..r {
                for k in 0..r {
                    if j != k {
                        sd_terms[j * r + k] = view.sd_term(j, k);
                    }
                }
            }
        }
        let e = r + 2;
        let mut td_terms = vec![0.0; e * e];
        if view.beta < 1.0 {
            for a in 0..e {
                for b in a + 1..e {
                    td_terms[a * e + b] = view.td_term(a, b);
                }
            }
        }
        let expected = expected_std_poly(&view);
        IncrementalDiversity { view, sd_terms, td_terms, expected }
    }

    pub fn view(&self) -> &TaskView {
        &self.view
    }

    /// `E(STD)` of the current workers.
    pub fn expected(&self) -> f64 {
        self.expected
    }

    /// `E(STD)` of the current workers plus `extra`.
    pub fn expected_with(&self, extra: &Contribution) -> f64 {
        let base = &self.view;
        let r = base.len();
        let arrival = extra.arrival.clamp(base.start, base.end);
        // the newcomer goes after existing workers with an equal key
        let ia = base.by_angle.partition_point(|&(a, _)| a <= extra.angle);
        let it = base.by_arrival.partition_point(|&(t, _)| t <= arrival);
        let mut by_angle = Vec::with_capacity(r + 1);
        by_angle.extend_from_slice(&base.by_angle[..ia]);
        by_angle.push((extra.angle, extra.confidence));
        by_angle.extend_from_slice(&base.by_angle[ia..]);
        let mut by_arrival = Vec::with_capacity(r + 1);
        by_arrival.extend_from_slice(&base.by_arrival[..it]);
        by_arrival.push((arrival, extra.confidence));
        by_arrival.extend_from_slice(&base.by_arrival[it..]);
        // the table sums read only the two orderings
        let view = TaskView {
            start: base.start,
            end: base.end,
            beta: base.beta,
            by_angle,
            gaps: Vec::new(),
            by_arrival,
            intervals: Vec::new(),
        };

        let mut sd = 0.0;
        if view.beta > 0.0 {
            let old = |i: usize| if i < ia { i } else { i - 1 };
            let term = |j: usize, k: usize| {
                if j == ia || k == ia {
                    view.sd_term(j, k)
                } else {
                    self.sd_terms[old(j) * r + old(k)]
                }
            };
            view.for_each_sd_entry(term, |_, _, v| sd += v);
        }
        let mut td = 0.0;
        if view.beta < 1.0 {
            // event `it + 1` is the newcomer
            let e = r + 2;
            let old = |x: usize| if x <= it { x } else { x - 1 };
            let term = |a: usize, b: usize| {
                if a == it + 1 || b == it + 1 {
                    view.td_term(a, b)
                } else {
                    self.td_terms[old(a) * e + old(b)]
                }
            };
            view.for_each_td_entry(term, |_, _, v| td += v);
        }
        view.beta * sd + (1.0 - view.beta) * td
    }
}

/// Bounds on the expected diversity of a worker set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityBounds {
    pub lb: f64,
    pub ub: f64,
}

/// `ub` is the diversity when everyone succeeds. `lb` multiplies the chance
/// that a world has non-zero diversity by the smallest non-zero diversity any
/// such world can have.
pub fn std_bounds(view: &TaskView) -> DiversityBounds {
    let r = view.len();
    if r == 0 {
        return DiversityBounds { lb: 0.0, ub: 0.0 };
    }
    let ub = view.full_std();

    // probabilities of zero and of exactly one success
    let (mut none, mut one) = (1.0, 0.0);
    for &(_, p) in &view.by_angle {
        one = one * (1.0 - p) + none * p;
        none *= 1.0 - p;
    }
    let at_least_one = (1.0 - none).max(0.0);
    let at_least_two = (1.0 - none - one).max(0.0);

    let min_sd = if r >= 2 {
        let g = view.gaps.iter().copied().fold(f64::INFINITY, f64::min) / TAU;
        entropy_term(g) + entropy_term(1.0 - g)
    } else {
        0.0
    };
    let span = view.span();
    let min_td = view
        .by_arrival
        .iter()
        .map(|&(a, _)| {
            let left = (a - view.start) / span;
            entropy_term(left) + entropy_term(1.0 - left)
        })
        .fold(f64::INFINITY, f64::min);

    let lb = view.beta * at_least_two * min_sd + (1.0 - view.beta) * at_least_one * min_td;
    DiversityBounds { lb: lb.min(ub).max(0.0), ub }
}

/// Bounds on the change of expected diversity when one worker is added.
pub fn delta_bounds(before: &DiversityBounds, after: &DiversityBounds) -> (f64, f64) {
    (after.lb - before.ub, after.ub - before.lb)
}
