//! Approximate solvers: greedy, random sampling, and divide and conquer.

pub mod dc;
pub mod dominance;
pub mod greedy;
pub mod sampling;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{CandidatePair, Instance};
use crate::objective::Assignment;

pub use dc::{bg_partition, dc_solve, gtruth_solve, sa_merge, ConflictGroup, DcConfig, SubSolver};
pub use dominance::{dominance_prune, dominance_rank, PairGain};
pub use greedy::{delta_min_rel, greedy_solve, GreedyState};
pub use sampling::{degrees, sample_size, sampling_solve, SamplePlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Greedy,
    Sampling,
    Dc,
    Gtruth,
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "greedy" => Ok(Algorithm::Greedy),
            "sampling" => Ok(Algorithm::Sampling),
            "dc" => Ok(Algorithm::Dc),
            "gtruth" => Ok(Algorithm::Gtruth),
            other => Err(format!("unknown algorithm '{other}'")),
        }
    }
}

/// The result of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub assignment: Assignment,
    /// Sample size of the top-level plan, for the sampling solver.
    pub plan: Option<SamplePlan>,
}

/// Runs one of the solvers. `cfg` supplies the seed and sampling parameters
/// to every algorithm; its recursion settings apply to the two D&C variants.
pub fn solve(algorithm: Algorithm, instance: &Instance, pairs: &[CandidatePair], cfg: &DcConfig) -> Result<SolveOutcome> {
    let (assignment, plan) = match algorithm {
        Algorithm::Greedy => (greedy_solve(instance, pairs)?, None),
        Algorithm::Sampling => {
            let plan = sample_size(&degrees(pairs), cfg.epsilon, cfg.delta, cfg.k_cap)?.scaled(cfg.sample_factor);
            (sampling_solve(instance, pairs, &plan, cfg.seed)?, Some(plan))
        }
        Algorithm::Dc => (dc_solve(instance, pairs, cfg)?, None),
        Algorithm::Gtruth => (gtruth_solve(instance, pairs, cfg)?, None),
    };
    Ok(SolveOutcome { assignment, plan })
}
