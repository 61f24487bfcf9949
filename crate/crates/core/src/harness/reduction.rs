//! Number partitioning encoded as an assignment problem: two tasks, one
//! worker per number, with `-ln(1-p_i) = a_i / a_max`. Diversity is zero for
//! every assignment, so maximising the smaller task reliability is exactly
//! minimising the larger half of the partition.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::model::{enumerate_pairs, CandidatePair, Instance, Point, Task, TaskId, WaitPolicy, Worker, WorkerId};
use crate::objective::{objective, Assignment};

/// Largest input accepted by the exhaustive helpers.
pub const EXHAUSTIVE_CAP: usize = 20;

#[derive(Debug, Clone)]
pub struct NumberPartitionInstance {
    pub values: Vec<u64>,
    pub instance: Instance,
    /// Every worker can reach both tasks.
    pub pairs: Vec<CandidatePair>,
}

/// Builds the encoding of `values`: tasks at (0.2, 0.5) and (0.8, 0.5) open
/// all day with `β = 1`, every worker at the centre with a full cone.
/// Workers share one location, so each task sees a single approach
/// direction and spatial diversity is zero.
pub fn reduction_from_number_partition(values: &[u64]) -> Result<NumberPartitionInstance> {
    if values.len() < 2 {
        return Err(Error::InvalidConfig("number partitioning needs at least two values".into()));
    }
    if let Some(i) = values.iter().position(|&a| a == 0) {
        return Err(Error::InvalidWorker(WorkerId(i as u32), "values must be positive".into()));
    }
    let a_max = *values.iter().max().expect("non-empty") as f64;
    let tasks = vec![
        Task::new(TaskId(0), Point::new(0.2, 0.5), 0.0, 24.0, 1.0)?,
        Task::new(TaskId(1), Point::new(0.8, 0.5), 0.0, 24.0, 1.0)?,
    ];
    let workers = values
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let p = -(-(a as f64) / a_max).exp_m1();
            Worker::new(WorkerId(i as u32), Point::new(0.5, 0.5), 1.0, 0.0, TAU, p)
        })
        .collect::<Result<Vec<_>>>()?;
    let instance = Instance::new(tasks, workers)?;
    let pairs = enumerate_pairs(&instance, 0.0, WaitPolicy::Strict);
    Ok(NumberPartitionInstance { values: values.to_vec(), instance, pairs })
}

impl NumberPartitionInstance {
    /// The assignment sending worker `i` to task 1 when bit `i` of `mask` is set.
    pub fn assignment_for(&self, mask: u64) -> Assignment {
        let mut a = Assignment::new();
        for p in &self.pairs {
            let side = (mask >> p.worker.0 & 1) as u32;
            if p.task.0 == side {
                a.insert(*p).expect("one pair per worker and side");
            }
        }
        a
    }

    /// Masks of full assignments with the largest smaller-task reliability
    /// (ties within a relative `1e-9`).
    pub fn optimal_assignments(&self) -> Result<Vec<u64>> {
        let n = self.values.len();
        if n > EXHAUSTIVE_CAP {
            return Err(Error::OracleCapExceeded { workers: n, cap: EXHAUSTIVE_CAP });
        }
        let mut scored = Vec::with_capacity(1 << n);
        for mask in 0..1u64 << n {
            let o = objective(&self.assignment_for(mask), &self.instance)?;
            // compare on the log scale, where reliabilities near 1 stay apart
            scored.push((mask, -(-o.min_rel).ln_1p()));
        }
        let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        Ok(scored.into_iter().filter(|s| s.1 >= best - 1e-9 * best.abs().max(1.0)).map(|s| s.0).collect())
    }
}

/// Masks (bit set = second half) whose halves differ least in sum.
pub fn optimal_partitions(values: &[u64]) -> Result<Vec<u64>> {
    let n = values.len();
    if n > EXHAUSTIVE_CAP {
        return Err(Error::OracleCapExceeded { workers: n, cap: EXHAUSTIVE_CAP });
    }
    let total: u64 = values.iter().sum();
    let discrepancy = |mask: u64| {
        let second: u64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| values[i]).sum();
        (total - second).abs_diff(second)
    };
    let best = (0..1u64 << n).map(discrepancy).min().expect("non-empty");
    Ok((0..1u64 << n).filter(|&m| discrepancy(m) == best).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_weights_are_normalised_values() {
        let np = reduction_from_number_partition(&[3, 1, 2]).unwrap();
        for (w, &a) in np.instance.workers().iter().zip(&np.values) {
            assert!((-(-w.confidence).ln_1p() - a as f64 / 3.0).abs() < 1e-12);
        }
        assert_eq!(np.pairs.len(), 6);
    }

    #[test]
    fn diversity_is_always_zero() {
        let np = reduction_from_number_partition(&[2, 5, 1, 4]).unwrap();
        for mask in 0..16 {
            assert_eq!(objective(&np.assignment_for(mask), &np.instance).unwrap().total_std, 0.0);
        }
    }

    #[test]
    fn symmetric_pair() {
        let np = reduction_from_number_partition(&[1, 1]).unwrap();
        let best = np.optimal_assignments().unwrap();
        assert_eq!(best, vec![1, 2]);
        let o = objective(&np.assignment_for(1), &np.instance).unwrap();
        // each task holds one worker with unit log-weight
        assert!((-(-o.min_rel).ln_1p() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(reduction_from_number_partition(&[1]).is_err());
        assert!(reduction_from_number_partition(&[1, 0]).is_err());
    }
}
