use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rdbsc_core::index::cost::solve_cell_size_bisection;
use rdbsc_core::index::{estimate_fractal_dimension, solve_cell_size, update_cost, GridIndex};
use rdbsc_core::model::{enumerate_pairs, reachability_check};
use rdbsc_core::{CandidatePair, Error, Instance, Point, Task, TaskId, WaitPolicy, Worker, WorkerId};

fn random_task(rng: &mut ChaCha8Rng, id: u32) -> Task {
    let s = rng.gen_range(0.0..3.0);
    let len = rng.gen_range(0.05..2.0);
    Task::new(TaskId(id), Point::new(rng.gen(), rng.gen()), s, s + len, rng.gen()).unwrap()
}

fn random_worker(rng: &mut ChaCha8Rng, id: u32) -> Worker {
    let lo = rng.gen_range(0.0..TAU);
    let width = rng.gen_range(0.05..=TAU);
    Worker::new(WorkerId(id), Point::new(rng.gen(), rng.gen()), rng.gen_range(0.05..1.0), lo, lo + width, rng.gen_range(0.5..1.0))
        .unwrap()
}

fn brute(
    tasks: &BTreeMap<TaskId, Task>,
    workers: &BTreeMap<WorkerId, Worker>,
    now: f64,
    policy: WaitPolicy,
) -> Vec<CandidatePair> {
    let inst = Instance::new(tasks.values().cloned().collect(), workers.values().cloned().collect()).unwrap();
    enumerate_pairs(&inst, now, policy)
}

fn assert_aggregates_exact(index: &GridIndex) {
    for (id, cell) in index.cells() {
        assert!(!cell.tasks.is_empty() || !cell.workers.is_empty(), "empty cell {id:?} kept");
        match cell.task_agg {
            None => assert!(cell.tasks.is_empty()),
            Some(agg) => {
                let s = cell.tasks.values().map(|t| t.start).fold(f64::INFINITY, f64::min);
                let e = cell.tasks.values().map(|t| t.end).fold(f64::NEG_INFINITY, f64::max);
                assert_eq!((agg.s_min, agg.e_max), (s, e));
            }
        }
        match cell.worker_agg {
            None => assert!(cell.workers.is_empty()),
            Some(agg) => {
                let lo = cell.workers.values().map(|w| w.velocity).fold(f64::INFINITY, f64::min);
                let hi = cell.workers.values().map(|w| w.velocity).fold(f64::NEG_INFINITY, f64::max);
                assert_eq!((agg.v_min, agg.v_max), (lo, hi));
                // the covering arc holds every cone's end points
                for w in cell.workers.values() {
                    for a in [w.angle_lo, w.angle_lo + w.cone_width() / 2.0, w.angle_hi] {
                        let off = (a - agg.cone_lo).rem_euclid(TAU);
                        assert!(off <= agg.cone_width + 1e-9 || off >= TAU - 1e-9, "{a} outside {agg:?}");
                    }
                }
            }
        }
        for w in cell.workers.values() {
            assert_eq!(index.cell_of(&w.location), *id);
        }
        for t in cell.tasks.values() {
            assert_eq!(index.cell_of(&t.location), *id);
        }
    }
}

/// Every truly reachable pair's destination cell is listed at its source cell.
fn assert_prune_safe(
    index: &GridIndex,
    tasks: &BTreeMap<TaskId, Task>,
    workers: &BTreeMap<WorkerId, Worker>,
    policy: WaitPolicy,
) {
    for w in workers.values() {
        for t in tasks.values() {
            if reachability_check(w, t, index.now(), policy).is_some() {
                let src = index.cell(index.cell_of(&w.location)).unwrap();
                assert!(src.tcell_list.contains(&index.cell_of(&t.location)), "{:?} -> {:?} pruned", w.id, t.id);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn retrieval_matches_brute_force_after_mutations(
        seed in any::<u64>(),
        eta in 0.03..0.5f64,
        wait in any::<bool>(),
        confirm in any::<bool>(),
        steps in 1usize..60,
    ) {
        let policy = if wait { WaitPolicy::Wait } else { WaitPolicy::Strict };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let now = rng.gen_range(0.0..1.0);
        let mut tasks: BTreeMap<TaskId, Task> = (0..20).map(|i| (TaskId(i), random_task(&mut rng, i))).collect();
        let mut workers: BTreeMap<WorkerId, Worker> = (0..20).map(|i| (WorkerId(i), random_worker(&mut rng, i))).collect();
        let ts: Vec<Task> = tasks.values().cloned().collect();
        let ws: Vec<Worker> = workers.values().cloned().collect();
        let mut index = GridIndex::build(&ts, &ws, eta, now, policy).unwrap();
        index.set_confirmation(confirm);
        for next in (20u32..).take(steps) {
            match rng.gen_range(0..4) {
                0 => {
                    let t = random_task(&mut rng, next);
                    index.insert_task(t.clone()).unwrap();
                    tasks.insert(t.id, t);
                }
                1 => {
                    let w = random_worker(&mut rng, next);
                    index.insert_worker(w.clone()).unwrap();
                    workers.insert(w.id, w);
                }
                2 if !tasks.is_empty() => {
                    let id = *tasks.keys().nth(rng.gen_range(0..tasks.len())).unwrap();
                    prop_assert_eq!(index.remove_task(id).unwrap(), tasks.remove(&id).unwrap());
                }
                3 if !workers.is_empty() => {
                    let id = *workers.keys().nth(rng.gen_range(0..workers.len())).unwrap();
                    prop_assert_eq!(index.remove_worker(id).unwrap(), workers.remove(&id).unwrap());
                }
                _ => {}
            }
            prop_assert_eq!(index.retrieve_valid_pairs(), brute(&tasks, &workers, now, policy));
        }
        prop_assert_eq!(index.task_count(), tasks.len());
        prop_assert_eq!(index.worker_count(), workers.len());
        assert_aggregates_exact(&index);
        assert_prune_safe(&index, &tasks, &workers, policy);
    }

    #[test]
    fn incremental_build_equals_bulk_build(seed in any::<u64>(), eta in 0.05..0.5f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ts: Vec<Task> = (0..15).map(|i| random_task(&mut rng, i)).collect();
        let ws: Vec<Worker> = (0..15).map(|i| random_worker(&mut rng, i)).collect();
        let bulk = GridIndex::build(&ts, &ws, eta, 0.5, WaitPolicy::Wait).unwrap();
        let mut inc = GridIndex::new(eta, 0.5, WaitPolicy::Wait).unwrap();
        for (t, w) in ts.iter().zip(&ws) {
            inc.insert_worker(w.clone()).unwrap();
            inc.insert_task(t.clone()).unwrap();
        }
        prop_assert_eq!(inc.canonical_form(), bulk.canonical_form());
    }

    #[test]
    fn insert_then_remove_restores_canonical_form(seed in any::<u64>(), eta in 0.05..0.5f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ts: Vec<Task> = (0..10).map(|i| random_task(&mut rng, i)).collect();
        let ws: Vec<Worker> = (0..10).map(|i| random_worker(&mut rng, i)).collect();
        let mut index = GridIndex::build(&ts, &ws, eta, 0.2, WaitPolicy::Strict).unwrap();
        let before = index.canonical_form();
        index.insert_worker(random_worker(&mut rng, 99)).unwrap();
        index.remove_worker(WorkerId(99)).unwrap();
        prop_assert_eq!(&index.canonical_form(), &before);
        index.insert_task(random_task(&mut rng, 99)).unwrap();
        index.remove_task(TaskId(99)).unwrap();
        prop_assert_eq!(&index.canonical_form(), &before);
    }
}

#[test]
fn empty_index_has_no_pairs() {
    let index = GridIndex::build(&[], &[], 0.1, 0.0, WaitPolicy::Strict).unwrap();
    assert!(index.retrieve_valid_pairs().is_empty());
    assert!(index.cells().all(|(_, c)| c.tcell_list.is_empty()));
    assert_eq!(index.task_count() + index.worker_count(), 0);
}

#[test]
fn same_cell_pair_lists_its_own_cell() {
    let t = Task::new(TaskId(0), Point::new(0.42, 0.41), 0.0, 5.0, 0.5).unwrap();
    let w = Worker::new(WorkerId(0), Point::new(0.41, 0.42), 1.0, 0.0, TAU, 0.9).unwrap();
    let index = GridIndex::build(std::slice::from_ref(&t), &[w], 0.1, 0.0, WaitPolicy::Strict).unwrap();
    let id = index.cell_of(&t.location);
    assert_eq!(index.cell(id).unwrap().tcell_list, BTreeSet::from([id]));
    assert_eq!(index.retrieve_valid_pairs().len(), 1);
}

#[test]
fn expired_tasks_are_stored_but_never_paired() {
    let w = Worker::new(WorkerId(0), Point::new(0.1, 0.1), 1.0, 0.0, TAU, 0.9).unwrap();
    let mut index = GridIndex::build(&[], &[w], 0.1, 10.0, WaitPolicy::Wait).unwrap();
    index.insert_task(Task::new(TaskId(0), Point::new(0.15, 0.1), 1.0, 2.0, 0.5).unwrap()).unwrap();
    assert_eq!(index.task_count(), 1);
    assert!(index.retrieve_valid_pairs().is_empty());
    let src = index.cell_of(&Point::new(0.1, 0.1));
    assert!(index.cell(src).unwrap().tcell_list.is_empty());
}

#[test]
fn cells_behind_every_cone_are_pruned() {
    // workers heading east; the task lies due west
    let ws: Vec<Worker> = (0..3)
        .map(|i| Worker::new(WorkerId(i), Point::new(0.55, 0.55 + 0.01 * i as f64), 1.0, -0.3, 0.3, 0.9).unwrap())
        .collect();
    let t = Task::new(TaskId(0), Point::new(0.05, 0.55), 0.0, 10.0, 0.5).unwrap();
    let mut index = GridIndex::build(std::slice::from_ref(&t), &ws, 0.1, 0.0, WaitPolicy::Wait).unwrap();
    for confirm in [false, true] {
        index.set_confirmation(confirm);
        let src = index.cell_of(&ws[0].location);
        assert!(!index.cell(src).unwrap().tcell_list.contains(&index.cell_of(&t.location)));
    }
}

#[test]
fn distant_insert_extends_the_source_list_and_removal_purges_it() {
    let w = Worker::new(WorkerId(0), Point::new(0.05, 0.05), 2.0, 0.0, TAU, 0.9).unwrap();
    let mut index = GridIndex::build(&[], std::slice::from_ref(&w), 0.1, 0.0, WaitPolicy::Wait).unwrap();
    let src = index.cell_of(&w.location);
    let far = Task::new(TaskId(7), Point::new(0.95, 0.95), 0.0, 3.0, 0.5).unwrap();
    let dst = index.cell_of(&far.location);
    index.insert_task(far).unwrap();
    assert!(index.cell(src).unwrap().tcell_list.contains(&dst));
    assert_eq!(index.retrieve_valid_pairs().len(), 1);
    index.remove_task(TaskId(7)).unwrap();
    assert!(index.cell(dst).is_none());
    assert!(index.cells().all(|(_, c)| !c.tcell_list.contains(&dst)));
    assert!(index.retrieve_valid_pairs().is_empty());
}

#[test]
fn removing_unknown_ids_is_an_error() {
    let mut index = GridIndex::new(0.2, 0.0, WaitPolicy::Strict).unwrap();
    assert!(matches!(index.remove_worker(WorkerId(3)), Err(Error::UnknownWorker(WorkerId(3)))));
    assert!(matches!(index.remove_task(TaskId(4)), Err(Error::UnknownTask(TaskId(4)))));
}

#[test]
fn faster_worker_never_lowers_v_max() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut index = GridIndex::new(0.5, 0.0, WaitPolicy::Strict).unwrap();
    let mut last = 0.0;
    for i in 0..30 {
        let mut w = random_worker(&mut rng, i);
        w.location = Point::new(0.1, 0.1);
        index.insert_worker(w).unwrap();
        let agg = index.cell(index.cell_of(&Point::new(0.1, 0.1))).unwrap().worker_agg.unwrap();
        assert!(agg.v_max >= last);
        last = agg.v_max;
    }
}

#[test]
fn separable_clusters_add_up() {
    // slow workers and short windows keep the two corners apart
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cluster = |rng: &mut ChaCha8Rng, cx: f64, base: u32| -> (Vec<Task>, Vec<Worker>) {
        let ts = (0..15)
            .map(|i| {
                Task::new(TaskId(base + i), Point::new(cx + rng.gen_range(0.0..0.1), rng.gen_range(0.0..0.1)), 0.0, 0.5, 0.5)
                    .unwrap()
            })
            .collect();
        let ws = (0..15)
            .map(|i| {
                Worker::new(
                    WorkerId(base + i),
                    Point::new(cx + rng.gen_range(0.0..0.1), rng.gen_range(0.0..0.1)),
                    0.3,
                    0.0,
                    TAU,
                    0.9,
                )
                .unwrap()
            })
            .collect();
        (ts, ws)
    };
    let (t1, w1) = cluster(&mut rng, 0.0, 0);
    let (t2, w2) = cluster(&mut rng, 0.9, 100);
    let count =
        |ts: &[Task], ws: &[Worker]| GridIndex::build(ts, ws, 0.05, 0.0, WaitPolicy::Wait).unwrap().retrieve_valid_pairs().len();
    let all_t: Vec<Task> = t1.iter().chain(&t2).cloned().collect();
    let all_w: Vec<Worker> = w1.iter().chain(&w2).cloned().collect();
    let (a, b) = (count(&t1, &w1), count(&t2, &w2));
    assert!(a > 0 && b > 0);
    assert_eq!(count(&all_t, &all_w), a + b);
}

#[test]
fn built_aggregates_are_exact_and_pruning_is_safe() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tasks: BTreeMap<TaskId, Task> = (0..60).map(|i| (TaskId(i), random_task(&mut rng, i))).collect();
        let workers: BTreeMap<WorkerId, Worker> = (0..60).map(|i| (WorkerId(i), random_worker(&mut rng, i))).collect();
        let ts: Vec<Task> = tasks.values().cloned().collect();
        let ws: Vec<Worker> = workers.values().cloned().collect();
        for policy in [WaitPolicy::Strict, WaitPolicy::Wait] {
            let index = GridIndex::build_auto(&ts, &ws, 0.3, policy).unwrap();
            assert_aggregates_exact(&index);
            assert_prune_safe(&index, &tasks, &workers, policy);
            assert_eq!(index.retrieve_valid_pairs(), brute(&tasks, &workers, 0.3, policy));
        }
    }
}

#[test]
fn fractal_dimension_over_seeds() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let square: Vec<Point> = (0..10_000).map(|_| Point::new(rng.gen(), rng.gen())).collect();
        let d = estimate_fractal_dimension(&square).unwrap();
        assert!((1.8..=2.0).contains(&d.d2) && !d.degenerate, "seed {seed}: {d:?}");
        let (a, b) = (rng.gen_range(0.0..0.5), rng.gen_range(0.5..1.0));
        let segment: Vec<Point> = (0..10_000)
            .map(|_| {
                let s: f64 = rng.gen();
                Point::new(a + s * (b - a) * 0.5, 0.2 + s * 0.6)
            })
            .collect();
        let d = estimate_fractal_dimension(&segment).unwrap();
        assert!((0.85..=1.15).contains(&d.d2), "seed {seed}: {d:?}");
    }
}

#[test]
fn cell_size_root_satisfies_the_stationarity_condition() {
    let (l, d2, n) = (0.1, 1.5, 10_001);
    let eta = solve_cell_size(l, d2, n).unwrap();
    let lhs = (l + eta).powf(d2 - 2.0) * eta.powi(3);
    let rhs = 2.0 * PI.powf(1.0 - d2 / 2.0) * l / (d2 * (n as f64 - 1.0));
    assert!((lhs - rhs).abs() <= 1e-9, "residual {}", lhs - rhs);
    let c = update_cost(l, eta, d2, n);
    assert!(update_cost(l, eta * 1.01, d2, n) >= c && update_cost(l, eta * 0.99, d2, n) >= c);

    let closed = solve_cell_size(0.1, 2.0, 10_001).unwrap();
    assert!((closed - 10f64.powf(-5.0 / 3.0)).abs() < 1e-9);
    assert!((closed - solve_cell_size_bisection(0.1, 2.0, 10_001).unwrap()).abs() < 1e-9);
}

#[test]
fn update_cost_grows_with_travel_range() {
    for d2 in [1.0, 1.5, 2.0] {
        let mut last = 0.0;
        for k in 1..20 {
            let c = update_cost(0.05 * k as f64, 0.05, d2, 1000);
            assert!(c > last);
            last = c;
        }
    }
    assert!(solve_cell_size(0.0, 2.0, 10).is_err());
    assert!(solve_cell_size(0.1, 2.0, 1).is_err());
}

#[test]
fn index_reports_its_cost_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ts: Vec<Task> = (0..200).map(|i| random_task(&mut rng, i)).collect();
    let ws: Vec<Worker> = (0..200).map(|i| random_worker(&mut rng, i)).collect();
    let index = GridIndex::build_auto(&ts, &ws, 0.0, WaitPolicy::Strict).unwrap();
    let p = index.cost_params().unwrap();
    assert_eq!(p.n, 400);
    let c = index.estimate_update_cost().unwrap();
    assert!((c - update_cost(p.l_max, index.eta(), p.d2, p.n)).abs() < 1e-12 * c);
    assert!(GridIndex::new(0.1, 0.0, WaitPolicy::Strict).unwrap().estimate_update_cost().is_none());
}
