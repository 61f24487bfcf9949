//! Self-checks against exhaustive oracles, runnable from the command line.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::diversity::{delta_bounds, expected_std_poly, std_bounds, TaskView};
use crate::entropy::expected_std_bruteforce;
use crate::error::{Error, Result};
use crate::harness::generator::{generate_instance, GeneratorConfig};
use crate::harness::reduction::{optimal_partitions, reduction_from_number_partition};
use crate::index::GridIndex;
use crate::model::{enumerate_pairs, CandidatePair, Contribution, Instance, Point, Task, TaskId, WaitPolicy, Worker, WorkerId};
use crate::objective::{objective, Assignment};
use crate::solvers::dominance::{dominance_rank, prune_mask};
use crate::solvers::greedy::GreedyState;
use crate::solvers::sampling::{degrees, draw_sample, pairs_by_worker, sample_size, DEFAULT_K_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Lemma1,
    Bounds,
    Pruning,
    SamplingRank,
    NpReduction,
    IndexEquivalence,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "lemma1" => Ok(Suite::Lemma1),
            "bounds" => Ok(Suite::Bounds),
            "pruning" => Ok(Suite::Pruning),
            "sampling-rank" => Ok(Suite::SamplingRank),
            "np-reduction" => Ok(Suite::NpReduction),
            "index-equivalence" => Ok(Suite::IndexEquivalence),
            other => Err(format!("unknown suite '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub trials: usize,
    pub failures: usize,
    /// Largest deviation from the oracle (suite-specific units).
    pub max_error: f64,
    pub passed: bool,
    pub detail: String,
}

/// A task with random window and weight.
pub fn random_task<R: Rng>(rng: &mut R) -> Task {
    let start = rng.gen_range(0.0..20.0);
    let len = rng.gen_range(0.5..4.0);
    Task::new(TaskId(0), Point::new(0.5, 0.5), start, start + len, rng.gen_range(0.0..=1.0)).expect("valid by construction")
}

/// `r` random contributions for `task`; some confidences are certain.
pub fn random_contributions<R: Rng>(rng: &mut R, task: &Task, r: usize) -> Vec<Contribution> {
    (0..r)
        .map(|i| Contribution {
            worker: WorkerId(i as u32),
            angle: rng.gen_range(0.0..TAU),
            arrival: rng.gen_range(task.start..=task.end),
            confidence: if rng.gen_bool(0.1) { 1.0 } else { rng.gen_range(0.0..1.0) },
        })
        .collect()
}

fn lemma1(trials: usize, rng: &mut ChaCha8Rng) -> Result<(usize, f64)> {
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..trials {
        let task = random_task(rng);
        let r = rng.gen_range(1..=12);
        let cs = random_contributions(rng, &task, r);
        let err = (expected_std_poly(&TaskView::new(&task, &cs)) - expected_std_bruteforce(&task, &cs)?).abs();
        worst = worst.max(err);
        failures += usize::from(err > 1e-9);
    }
    Ok((failures, worst))
}

fn bounds(trials: usize, rng: &mut ChaCha8Rng) -> Result<(usize, f64)> {
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..trials {
        let task = random_task(rng);
        let r = rng.gen_range(1..=11);
        let after = random_contributions(rng, &task, r);
        let before = &after[..after.len() - 1];
        let (e0, e1) = (expected_std_bruteforce(&task, before)?, expected_std_bruteforce(&task, &after)?);
        let (b0, b1) = (std_bounds(&TaskView::new(&task, before)), std_bounds(&TaskView::new(&task, &after)));
        let (lo, hi) = delta_bounds(&b0, &b1);
        let violation =
            [b0.lb - e0, e0 - b0.ub, b1.lb - e1, e1 - b1.ub, lo - (e1 - e0), (e1 - e0) - hi].into_iter().fold(0.0f64, f64::max);
        worst = worst.max(violation);
        failures += usize::from(violation > 1e-12);
    }
    Ok((failures, worst))
}

/// Small instance where most workers reach most tasks.
pub fn dense_instance<R: Rng>(rng: &mut R, m: usize, n: usize) -> Result<(Instance, Vec<CandidatePair>)> {
    let cfg = GeneratorConfig {
        m,
        n,
        start: (0.0, 0.5),
        rt: (2.0, 4.0),
        velocity: (0.5, 1.0),
        cone_width: (TAU / 2.0, TAU),
        confidence: (0.3, 0.95),
        beta: (0.0, 1.0),
        seed: rng.gen(),
        ..GeneratorConfig::default()
    };
    let (t, w) = generate_instance(&cfg)?;
    let inst = Instance::new(t, w)?;
    let pairs = enumerate_pairs(&inst, 0.0, WaitPolicy::Wait);
    Ok((inst, pairs))
}

fn pruning(trials: usize, rng: &mut ChaCha8Rng) -> Result<(usize, f64)> {
    let mut failures = 0;
    let mut rounds = 0;
    while rounds < trials {
        let (m, n) = (rng.gen_range(2..=5), rng.gen_range(3..=10));
        let (inst, pairs) = dense_instance(rng, m, n)?;
        let mut state = GreedyState::new(&inst, &pairs)?;
        for _ in 0..rng.gen_range(0..3) {
            match state.select() {
                Some(g) => state.commit(&g.pair)?,
                None => break,
            }
        }
        let mut gains = state.gains();
        if gains.is_empty() {
            continue;
        }
        rounds += 1;
        state.fill_exact(&mut gains)?;
        let points: Vec<(f64, f64)> = gains.iter().map(|g| (g.delta_min_rel, g.exact_delta_std.unwrap_or(0.0))).collect();
        let winner = dominance_rank(&points)?;
        if !prune_mask(&gains)[winner] {
            failures += 1;
        }
    }
    Ok((failures, failures as f64))
}

/// Total diversity of every full assignment (each worker with a reachable
/// task takes one), in no particular order.
pub fn population_diversities(instance: &Instance, pairs: &[CandidatePair]) -> Result<Vec<f64>> {
    let options: Vec<Vec<CandidatePair>> = pairs_by_worker(pairs).into_values().collect();
    let mut out = Vec::new();
    let mut choice = vec![0usize; options.len()];
    loop {
        let a = Assignment::from(options.iter().zip(&choice).map(|(o, &c)| o[c]).collect::<Vec<_>>());
        out.push(objective(&a, instance)?.total_std);
        let mut i = 0;
        loop {
            if i == options.len() {
                return Ok(out);
            }
            choice[i] += 1;
            if choice[i] < options[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// One-sided lower confidence bound on a binomial proportion (Clopper–Pearson).
pub fn clopper_pearson_lower(successes: usize, trials: usize, alpha: f64) -> f64 {
    if successes == 0 {
        return 0.0;
    }
    let beta = Beta::new(successes as f64, (trials - successes + 1) as f64).expect("positive shapes");
    // statrs' generic quantile stops after 16 halvings; bisect to full precision
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if beta.cdf(mid) >= alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Outcome of the rank experiment for one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankExperiment {
    pub population: usize,
    pub k_hat: u64,
    pub hits: usize,
    pub trials: usize,
    pub lower_bound: f64,
}

/// Draws `k_hat` samples per trial and counts trials whose most diverse
/// sample ranks above `(1-ε)N` in the enumerated population.
pub fn rank_experiment(
    instance: &Instance,
    pairs: &[CandidatePair],
    epsilon: f64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<RankExperiment> {
    let mut population = population_diversities(instance, pairs)?;
    population.sort_by(f64::total_cmp);
    let n = population.len();
    let plan = sample_size(&degrees(pairs), epsilon, delta, DEFAULT_K_CAP)?;
    let by_worker = pairs_by_worker(pairs);
    let threshold = (1.0 - epsilon) * n as f64;
    let mut hits = 0;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
        let best = (0..plan.k_hat)
            .map(|_| objective(&draw_sample(&by_worker, &mut rng), instance).map(|o| o.total_std))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        // rank = number of population values not above the sample, with slack for rounding
        let rank = population.partition_point(|v| *v <= best + 1e-12);
        hits += usize::from(rank as f64 > threshold);
    }
    Ok(RankExperiment { population: n, k_hat: plan.k_hat, hits, trials, lower_bound: clopper_pearson_lower(hits, trials, 0.01) })
}

fn sampling_rank(trials: usize, rng: &mut ChaCha8Rng) -> Result<(usize, f64, String)> {
    let (inst, pairs) = loop {
        let (inst, pairs) = dense_instance(rng, 4, 6)?;
        let n: usize = degrees(&pairs).iter().product();
        if (64..=100_000).contains(&n) {
            break (inst, pairs);
        }
    };
    let exp = rank_experiment(&inst, &pairs, 0.1, 0.9, trials, rng.gen())?;
    let detail = format!(
        "N={} k_hat={} hits={}/{} lower99={:.4} required={:.2}",
        exp.population,
        exp.k_hat,
        exp.hits,
        exp.trials,
        exp.lower_bound,
        0.9 - 0.03
    );
    let failed = exp.lower_bound < 0.9 - 0.03;
    Ok((usize::from(failed), (0.9 - 0.03 - exp.lower_bound).max(0.0), detail))
}

fn np_reduction(trials: usize, rng: &mut ChaCha8Rng) -> Result<(usize, f64)> {
    let mut failures = 0;
    for _ in 0..trials {
        let len = rng.gen_range(2..=12);
        let values: Vec<u64> = (0..len).map(|_| rng.gen_range(1..=30)).collect();
        let np = reduction_from_number_partition(&values)?;
        let a: BTreeSet<u64> = np.optimal_assignments()?.into_iter().collect();
        let b: BTreeSet<u64> = optimal_partitions(&values)?.into_iter().collect();
        failures += usize::from(a != b);
    }
    Ok((failures, failures as f64))
}

fn index_equivalence(trials: usize, rng: &mut ChaCha8Rng) -> Result<(usize, f64)> {
    let mut mismatches = 0;
    for _ in 0..trials {
        let cfg = GeneratorConfig {
            m: rng.gen_range(5..60),
            n: rng.gen_range(5..60),
            start: (0.0, 6.0),
            velocity: (0.1, 0.6),
            cone_width: (0.1, TAU),
            seed: rng.gen(),
            ..GeneratorConfig::default()
        };
        let (tasks, workers) = generate_instance(&cfg)?;
        let policy = if rng.gen_bool(0.5) { WaitPolicy::Strict } else { WaitPolicy::Wait };
        let split_t = tasks.len() / 2;
        let split_w = workers.len() / 2;
        let mut index =
            GridIndex::build(&tasks[..split_t], &workers[..split_w], rng.gen_range(0.02..0.5), rng.gen_range(0.0..3.0), policy)?;
        let mut live_t: Vec<Task> = tasks[..split_t].to_vec();
        let mut live_w: Vec<Worker> = workers[..split_w].to_vec();
        let (mut spare_t, mut spare_w) = (tasks[split_t..].to_vec(), workers[split_w..].to_vec());
        for _ in 0..rng.gen_range(5..30) {
            match rng.gen_range(0..5) {
                0 if !spare_t.is_empty() => {
                    let t = spare_t.swap_remove(rng.gen_range(0..spare_t.len()));
                    index.insert_task(t.clone())?;
                    live_t.push(t);
                }
                1 if !spare_w.is_empty() => {
                    let w = spare_w.swap_remove(rng.gen_range(0..spare_w.len()));
                    index.insert_worker(w.clone())?;
                    live_w.push(w);
                }
                2 if !live_t.is_empty() => {
                    let t = live_t.swap_remove(rng.gen_range(0..live_t.len()));
                    index.remove_task(t.id)?;
                    spare_t.push(t);
                }
                3 if !live_w.is_empty() => {
                    let w = live_w.swap_remove(rng.gen_range(0..live_w.len()));
                    index.remove_worker(w.id)?;
                    spare_w.push(w);
                }
                _ => index.set_now(rng.gen_range(0.0..3.0)),
            }
        }
        let brute = enumerate_pairs(&Instance::new(live_t, live_w)?, index.now(), policy);
        if index.retrieve_valid_pairs() != brute {
            mismatches += 1;
        }
    }
    Ok((mismatches, mismatches as f64))
}

/// Runs one suite with `trials` random cases.
pub fn run_suite(suite: Suite, trials: usize, seed: u64) -> Result<VerifyReport> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (failures, max_error, detail) = match suite {
        Suite::Lemma1 => {
            let (f, e) = lemma1(trials, &mut rng)?;
            (f, e, "max |polynomial - enumeration|".to_string())
        }
        Suite::Bounds => {
            let (f, e) = bounds(trials, &mut rng)?;
            (f, e, "max bound violation".to_string())
        }
        Suite::Pruning => {
            let (f, e) = pruning(trials, &mut rng)?;
            (f, e, "rounds whose winner was pruned".to_string())
        }
        Suite::SamplingRank => sampling_rank(trials, &mut rng)?,
        Suite::NpReduction => {
            let (f, e) = np_reduction(trials, &mut rng)?;
            (f, e, "instances with differing optimal splits".to_string())
        }
        Suite::IndexEquivalence => {
            let (f, e) = index_equivalence(trials, &mut rng)?;
            (f, e, "pair-set mismatches".to_string())
        }
    };
    Ok(VerifyReport { suite, trials, failures, max_error, passed: failures == 0, detail })
}
