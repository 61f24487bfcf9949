//! Periodic reassignment over a time horizon: every `t_interval` hours the
//! free workers are matched to open tasks, then travel, arrive, and answer
//! or fail.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diversity::{expected_std_poly, TaskView};
use crate::entropy::std_exact;
use crate::error::{Error, Result};
use crate::index::GridIndex;
use crate::model::{enumerate_pairs, normalize_angle, Contribution, Instance, Task, TaskId, WaitPolicy, Worker, WorkerId};
use crate::reliability::reliability;
use crate::solvers::{solve, Algorithm, DcConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Hours between reassignment rounds.
    pub t_interval: f64,
    /// Rounds start at `k·t_interval < horizon`; round 0 always runs.
    pub horizon: f64,
    pub algorithm: Algorithm,
    pub solver: DcConfig,
    pub policy: WaitPolicy,
    /// Retrieve pairs through the grid index rather than by full sweep.
    pub use_index: bool,
    /// Half-width of the uniform noise on the reported answer angle.
    pub angle_jitter: f64,
    /// Half-width of the uniform noise on the reported answer time.
    pub time_jitter: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            t_interval: 1.0,
            horizon: 24.0,
            algorithm: Algorithm::Greedy,
            solver: DcConfig::default(),
            policy: WaitPolicy::Strict,
            use_index: true,
            angle_jitter: 0.0,
            time_jitter: 0.0,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_interval.is_finite() && self.t_interval > 0.0) {
            return Err(Error::InvalidConfig("t_interval must be positive".into()));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidConfig("horizon must be positive".into()));
        }
        if self.angle_jitter < 0.0 || self.time_jitter < 0.0 {
            return Err(Error::InvalidConfig("jitter must be non-negative".into()));
        }
        self.solver.validate()
    }
}

/// One worker's visit to a task and its outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub task: TaskId,
    pub worker: WorkerId,
    /// Planned approach angle and arrival.
    pub planned_angle: f64,
    pub planned_time: f64,
    /// Angle and time the answer actually reports.
    pub angle: f64,
    pub time: f64,
    pub success: bool,
}

/// Error score of an answer against the required angle and time:
/// `β·Δθ/π + (1-β)·Δt/(e-s)`, in `[0, 1]`, zero for a perfect answer.
pub fn answer_accuracy(record: &AnswerRecord, task: &Task, required_angle: f64, required_time: f64) -> f64 {
    let d = normalize_angle(record.angle - required_angle);
    let d_theta = d.min(2.0 * PI - d);
    let span = task.duration();
    let d_t = (record.time - required_time).abs().min(span);
    task.beta * d_theta / PI + (1.0 - task.beta) * d_t / span
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub time: f64,
    pub open_tasks: usize,
    pub available_workers: usize,
    pub pairs: usize,
    pub assigned: usize,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task: TaskId,
    pub assigned: usize,
    pub successes: usize,
    pub failures: usize,
    /// Reliability of all workers ever sent to the task.
    pub reliability: f64,
    /// Expected diversity of all workers ever sent to the task.
    pub expected_std: f64,
    /// Diversity of the answers actually received.
    pub realized_std: f64,
    /// Mean error score of received answers; `None` without answers.
    pub error_score: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub rounds: Vec<RoundSummary>,
    pub tasks: Vec<TaskOutcome>,
    pub answers: Vec<AnswerRecord>,
    pub min_rel: f64,
    pub total_std: f64,
    pub realized_std: f64,
    pub assigned: usize,
    pub successes: usize,
    pub failures: usize,
    pub wall_seconds: f64,
}

struct Trip {
    task: TaskId,
    worker: WorkerId,
    arrival: f64,
    angle: f64,
    confidence: f64,
}

struct Ledger<'a> {
    tasks: BTreeMap<TaskId, &'a Task>,
    pool: BTreeMap<WorkerId, Worker>,
    received: BTreeMap<TaskId, Vec<Contribution>>,
    answers: Vec<AnswerRecord>,
    rng: ChaCha8Rng,
    angle_jitter: f64,
    time_jitter: f64,
}

impl Ledger<'_> {
    /// Settles finished trips in order: success draw, reported answer, and
    /// the worker freed at the task location.
    fn resolve(&mut self, trips: Vec<Trip>) {
        for trip in trips {
            let success = self.rng.gen::<f64>() < trip.confidence;
            let task = self.tasks[&trip.task];
            let angle = normalize_angle(trip.angle + self.rng.gen_range(-1.0..=1.0) * self.angle_jitter);
            let time = (trip.arrival + self.rng.gen_range(-1.0..=1.0) * self.time_jitter).clamp(task.start, task.end);
            self.answers.push(AnswerRecord {
                task: trip.task,
                worker: trip.worker,
                planned_angle: trip.angle,
                planned_time: trip.arrival,
                angle,
                time,
                success,
            });
            if success {
                self.received.entry(trip.task).or_default().push(Contribution {
                    worker: trip.worker,
                    angle: trip.angle,
                    arrival: trip.arrival,
                    confidence: 1.0,
                });
            }
            let w = self.pool.get_mut(&trip.worker).expect("trips belong to known workers");
            w.location = task.location;
            w.available_at = trip.arrival;
        }
    }
}

/// Runs the reassignment loop. Workers in flight are never reassigned;
/// each trip resolves at its arrival time, succeeding with the worker's
/// confidence, after which the worker is free again at the task location.
/// Each round's objective counts received answers (as certain), workers
/// still travelling, and the newly assigned ones.
pub fn simulate_incremental(tasks: &[Task], workers: &[Worker], cfg: &SimulationConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    let started = Instant::now();
    let mut ledger = Ledger {
        tasks: tasks.iter().map(|t| (t.id, t)).collect(),
        pool: workers.iter().map(|w| (w.id, w.clone())).collect(),
        received: BTreeMap::new(),
        answers: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x005E_ED0F_A115),
        angle_jitter: cfg.angle_jitter,
        time_jitter: cfg.time_jitter,
    };
    let mut in_flight: Vec<Trip> = Vec::new();
    let mut sent: BTreeMap<TaskId, Vec<Contribution>> = BTreeMap::new();
    let mut rounds = Vec::new();

    let mut round = 0usize;
    loop {
        let now = round as f64 * cfg.t_interval;
        if round > 0 && now >= cfg.horizon {
            break;
        }
        // answers that came in since the last round
        in_flight.sort_by(|a, b| a.arrival.total_cmp(&b.arrival).then(a.worker.cmp(&b.worker)));
        let split = in_flight.partition_point(|t| t.arrival <= now);
        let done: Vec<Trip> = in_flight.drain(..split).collect();
        ledger.resolve(done);

        let busy: std::collections::BTreeSet<WorkerId> = in_flight.iter().map(|t| t.worker).collect();
        let open: Vec<Task> = tasks.iter().filter(|t| t.end >= now).cloned().collect();
        let free: Vec<Worker> =
            ledger.pool.values().filter(|w| !busy.contains(&w.id) && w.available_at <= now).cloned().collect();
        let mut baseline: BTreeMap<TaskId, Vec<Contribution>> = BTreeMap::new();
        for t in &open {
            let mut cs = ledger.received.get(&t.id).cloned().unwrap_or_default();
            cs.extend(in_flight.iter().filter(|tr| tr.task == t.id).map(|tr| Contribution {
                worker: tr.worker,
                angle: tr.angle,
                arrival: tr.arrival,
                confidence: tr.confidence,
            }));
            if !cs.is_empty() {
                baseline.insert(t.id, cs);
            }
        }
        let open_count = open.len();
        let free_count = free.len();
        let tick = Instant::now();
        let (pairs, assigned) = if open.is_empty() || free.is_empty() {
            (0, Vec::new())
        } else {
            let pairs = if cfg.use_index {
                GridIndex::build_auto(&open, &free, now, cfg.policy)?.retrieve_valid_pairs()
            } else {
                let inst = Instance::new(open.clone(), free.clone())?;
                enumerate_pairs(&inst, now, cfg.policy)
            };
            let instance = Instance::new(open, free)?.with_baseline(baseline)?;
            let solver = DcConfig { seed: cfg.seed.wrapping_add(round as u64), ..cfg.solver };
            let outcome = solve(cfg.algorithm, &instance, &pairs, &solver)?;
            let assigned: Vec<Trip> = outcome
                .assignment
                .pairs()
                .map(|p| Trip {
                    task: p.task,
                    worker: p.worker,
                    arrival: p.arrival,
                    angle: p.angle,
                    confidence: instance.worker(p.worker).map_or(0.0, |w| w.confidence),
                })
                .collect();
            (pairs.len(), assigned)
        };
        rounds.push(RoundSummary {
            round,
            time: now,
            open_tasks: open_count,
            available_workers: free_count,
            pairs,
            assigned: assigned.len(),
            solve_seconds: tick.elapsed().as_secs_f64(),
        });
        for trip in &assigned {
            sent.entry(trip.task).or_default().push(Contribution {
                worker: trip.worker,
                angle: trip.angle,
                arrival: trip.arrival,
                confidence: trip.confidence,
            });
        }
        in_flight.extend(assigned);
        round += 1;
    }
    in_flight.sort_by(|a, b| a.arrival.total_cmp(&b.arrival).then(a.worker.cmp(&b.worker)));
    ledger.resolve(std::mem::take(&mut in_flight));
    let Ledger { received, answers, .. } = ledger;

    let mut report = SimulationReport { rounds, min_rel: f64::INFINITY, ..Default::default() };
    for task in tasks {
        let cs = sent.get(&task.id).map(Vec::as_slice).unwrap_or(&[]);
        let got = received.get(&task.id).map(Vec::as_slice).unwrap_or(&[]);
        let mine: Vec<&AnswerRecord> = answers.iter().filter(|a| a.task == task.id).collect();
        let scores: Vec<f64> =
            mine.iter().filter(|a| a.success).map(|a| answer_accuracy(a, task, a.planned_angle, a.planned_time)).collect();
        let outcome = TaskOutcome {
            task: task.id,
            assigned: cs.len(),
            successes: got.len(),
            failures: mine.len() - got.len(),
            reliability: reliability(&cs.iter().map(|c| c.confidence).collect::<Vec<_>>()),
            expected_std: expected_std_poly(&TaskView::new(task, cs)),
            realized_std: std_exact(task, got),
            error_score: (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64),
        };
        report.min_rel = report.min_rel.min(outcome.reliability);
        report.total_std += outcome.expected_std;
        report.realized_std += outcome.realized_std;
        report.assigned += outcome.assigned;
        report.successes += outcome.successes;
        report.failures += outcome.failures;
        report.tasks.push(outcome);
    }
    if tasks.is_empty() {
        report.min_rel = 0.0;
    }
    report.answers = answers;
    report.wall_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}
