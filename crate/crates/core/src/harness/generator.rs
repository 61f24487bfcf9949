//! Synthetic instances: uniform or centre-skewed locations with tasks,
//! confidences, speeds and cones drawn from configurable ranges.

use std::f64::consts::{PI, TAU};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, Point, Task, TaskId, Worker, WorkerId};

/// Share of entities drawn from the central cluster of a skewed instance.
const SKEW_SHARE: f64 = 0.9;
const SKEW_SIGMA: f64 = 0.2;
const CONFIDENCE_SIGMA: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Uniform,
    Skewed,
}

impl std::str::FromStr for Distribution {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "uniform" => Ok(Distribution::Uniform),
            "skewed" => Ok(Distribution::Skewed),
            other => Err(format!("unknown distribution '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub m: usize,
    pub n: usize,
    pub distribution: Distribution,
    /// Length of each task's valid period, hours.
    pub rt: (f64, f64),
    /// Range of each task's start time, hours.
    pub start: (f64, f64),
    pub confidence: (f64, f64),
    pub velocity: (f64, f64),
    /// Draw speeds from a Gaussian around the range midpoint instead of uniformly.
    pub gaussian_velocity: bool,
    /// Cone width range; widths are drawn from `(lo, hi]`.
    pub cone_width: (f64, f64),
    pub beta: (f64, f64),
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            m: 100,
            n: 200,
            distribution: Distribution::Uniform,
            rt: (1.0, 2.0),
            start: (0.0, 24.0),
            confidence: (0.9, 1.0),
            velocity: (0.2, 0.3),
            gaussian_velocity: false,
            cone_width: (0.0, PI / 6.0),
            beta: (0.4, 0.6),
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let ordered = |name: &str, (lo, hi): (f64, f64)| -> Result<()> {
            if lo.is_finite() && hi.is_finite() && lo <= hi {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} range [{lo}, {hi}] is not ordered")))
            }
        };
        if self.m == 0 || self.n == 0 {
            return bad(format!("need at least one task and one worker, got m={} n={}", self.m, self.n));
        }
        ordered("rt", self.rt)?;
        ordered("start", self.start)?;
        ordered("confidence", self.confidence)?;
        ordered("velocity", self.velocity)?;
        ordered("cone width", self.cone_width)?;
        ordered("beta", self.beta)?;
        if self.rt.0 <= 0.0 {
            return bad("valid periods must have positive length".into());
        }
        if self.confidence.0 < 0.0 || self.confidence.1 > 1.0 {
            return bad("confidence must lie in [0, 1]".into());
        }
        if self.velocity.0 <= 0.0 {
            return bad("velocity must be positive".into());
        }
        if self.cone_width.1 <= 0.0 || self.cone_width.0 < 0.0 || self.cone_width.1 > TAU {
            return bad("cone width must lie in (0, 2pi]".into());
        }
        if self.beta.0 < 0.0 || self.beta.1 > 1.0 {
            return bad("beta must lie in [0, 1]".into());
        }
        Ok(())
    }
}

fn uniform_in<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

fn locations<R: Rng>(rng: &mut R, count: usize, dist: Distribution) -> Vec<Point> {
    let clustered: Vec<bool> = match dist {
        Distribution::Uniform => vec![false; count],
        Distribution::Skewed => {
            let k = (SKEW_SHARE * count as f64).round() as usize;
            let mut flags = vec![false; count];
            for i in sample(rng, count, k) {
                flags[i] = true;
            }
            flags
        }
    };
    let gauss = Normal::new(0.5, SKEW_SIGMA).expect("positive sigma");
    clustered
        .into_iter()
        .map(|c| {
            if c {
                loop {
                    let p = Point::new(gauss.sample(rng), gauss.sample(rng));
                    if p.in_unit_square() {
                        break p;
                    }
                }
            } else {
                Point::new(rng.gen(), rng.gen())
            }
        })
        .collect()
}

/// Tasks and workers for a configuration; identical seeds give identical output.
pub fn generate_instance(cfg: &GeneratorConfig) -> Result<(Vec<Task>, Vec<Worker>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let task_locs = locations(&mut rng, cfg.m, cfg.distribution);
    let mut tasks = Vec::with_capacity(cfg.m);
    for (i, loc) in task_locs.into_iter().enumerate() {
        let start = uniform_in(&mut rng, cfg.start);
        let length = uniform_in(&mut rng, cfg.rt);
        let beta = uniform_in(&mut rng, cfg.beta);
        tasks.push(Task::new(TaskId(i as u32), loc, start, start + length, beta)?);
    }

    let worker_locs = locations(&mut rng, cfg.n, cfg.distribution);
    let (p_lo, p_hi) = cfg.confidence;
    let p_dist = Normal::new((p_lo + p_hi) / 2.0, CONFIDENCE_SIGMA).expect("positive sigma");
    let (v_lo, v_hi) = cfg.velocity;
    let v_dist = Normal::new((v_lo + v_hi) / 2.0, ((v_hi - v_lo) / 4.0).max(f64::MIN_POSITIVE)).expect("positive sigma");
    let (w_lo, w_hi) = cfg.cone_width;
    let mut workers = Vec::with_capacity(cfg.n);
    for (i, loc) in worker_locs.into_iter().enumerate() {
        let velocity =
            if cfg.gaussian_velocity { v_dist.sample(&mut rng).clamp(v_lo, v_hi) } else { uniform_in(&mut rng, cfg.velocity) };
        let angle_lo = rng.gen_range(0.0..TAU);
        let width = w_hi - rng.gen::<f64>() * (w_hi - w_lo);
        let confidence = p_dist.sample(&mut rng).clamp(p_lo, p_hi);
        workers.push(Worker::new(WorkerId(i as u32), loc, velocity, angle_lo, angle_lo + width, confidence)?);
    }
    Ok((tasks, workers))
}

/// [`generate_instance`] wrapped as an [`Instance`].
pub fn generate(cfg: &GeneratorConfig) -> Result<Instance> {
    let (t, w) = generate_instance(cfg)?;
    Instance::new(t, w)
}
