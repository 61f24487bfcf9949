//! Exact spatial/temporal diversity of a concrete worker set, and the
//! possible-world enumeration that serves as ground truth for the
//! polynomial evaluation in [`crate::diversity`].

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::model::{Contribution, Task};
use crate::reliability::possible_worlds;

/// Largest worker set the enumeration oracle accepts.
pub const ORACLE_CAP: usize = 20;

/// Entropy term `-x ln x` with `0 ln 0 = 0`. Values outside `(0, 1)` give 0.
#[inline]
pub fn entropy_term(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.ln()
    }
}

/// Spatial diversity: entropy of the cyclic gaps between approach angles.
pub fn sd_exact(angles: &[f64]) -> f64 {
    if angles.len() < 2 {
        return 0.0;
    }
    let mut sorted = angles.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r = sorted.len();
    let mut total = 0.0;
    for i in 0..r {
        let gap = if i + 1 < r { sorted[i + 1] - sorted[i] } else { sorted[0] + TAU - sorted[r - 1] };
        total += entropy_term(gap / TAU);
    }
    total
}

/// Temporal diversity: entropy of the sub-intervals that arrivals cut out of
/// the valid period `[start, end]`.
pub fn td_exact(arrivals: &[f64], start: f64, end: f64) -> f64 {
    if arrivals.is_empty() {
        return 0.0;
    }
    let span = end - start;
    let mut sorted: Vec<f64> = arrivals.iter().map(|a| a.clamp(start, end)).collect();
    sorted.sort_by(f64::total_cmp);
    let mut prev = start;
    let mut total = 0.0;
    for &a in &sorted {
        total += entropy_term((a - prev) / span);
        prev = a;
    }
    total + entropy_term((end - prev) / span)
}

/// Combined diversity `β·SD + (1-β)·TD` of the workers in one world.
pub fn std_exact(task: &Task, world: &[Contribution]) -> f64 {
    let angles: Vec<f64> = world.iter().map(|c| c.angle).collect();
    let arrivals: Vec<f64> = world.iter().map(|c| c.arrival).collect();
    task.beta * sd_exact(&angles) + (1.0 - task.beta) * td_exact(&arrivals, task.start, task.end)
}

/// Expected diversity by enumerating all `2^r` possible worlds.
pub fn expected_std_bruteforce(task: &Task, assigned: &[Contribution]) -> Result<f64> {
    if assigned.len() > ORACLE_CAP {
        return Err(Error::OracleCapExceeded { workers: assigned.len(), cap: ORACLE_CAP });
    }
    let confidences: Vec<f64> = assigned.iter().map(|c| c.confidence).collect();
    let mut world = Vec::with_capacity(assigned.len());
    let mut expected = 0.0;
    for pw in possible_worlds(&confidences) {
        if pw.probability == 0.0 {
            continue;
        }
        world.clear();
        world.extend(assigned.iter().enumerate().filter(|(i, _)| pw.contains(*i)).map(|(_, c)| *c));
        expected += pw.probability * std_exact(task, &world);
    }
    Ok(expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Point, TaskId, WorkerId};
    use std::f64::consts::{LN_2, PI};

    fn task(beta: f64) -> Task {
        Task::new(TaskId(0), Point::new(0.5, 0.5), 0.0, 2.0, beta).unwrap()
    }

    fn c(id: u32, angle: f64, arrival: f64, p: f64) -> Contribution {
        Contribution { worker: WorkerId(id), angle, arrival, confidence: p }
    }

    #[test]
    fn spatial_examples() {
        assert!((sd_exact(&[0.0, PI]) - LN_2).abs() < 1e-12);
        assert_eq!(sd_exact(&[1.234]), 0.0);
        let quad = [0.0, PI / 2.0, PI, 1.5 * PI];
        assert!((sd_exact(&quad) - 4f64.ln()).abs() < 1e-12);
        // coincident angles leave a zero gap that contributes nothing
        assert_eq!(sd_exact(&[0.7, 0.7]), 0.0);
    }

    #[test]
    fn temporal_examples() {
        assert!((td_exact(&[1.0], 0.0, 2.0) - LN_2).abs() < 1e-12);
        assert_eq!(td_exact(&[], 0.0, 2.0), 0.0);
        assert_eq!(td_exact(&[0.0], 0.0, 2.0), 0.0);
    }

    #[test]
    fn combined_examples() {
        let pair = [c(0, 0.0, 0.5, 1.0), c(1, PI, 1.5, 1.0)];
        assert!((std_exact(&task(1.0), &pair) - LN_2).abs() < 1e-12);
        assert!((std_exact(&task(0.0), &[c(0, 0.0, 1.0, 1.0)]) - LN_2).abs() < 1e-12);
        let sd = sd_exact(&[0.0, PI]);
        let td = td_exact(&[0.5, 1.5], 0.0, 2.0);
        assert!((std_exact(&task(0.5), &pair) - (0.5 * sd + 0.5 * td)).abs() < 1e-12);
    }

    #[test]
    fn oracle_examples() {
        let certain = [c(0, 0.3, 0.2, 1.0), c(1, 2.0, 1.1, 1.0), c(2, 4.0, 1.7, 1.0)];
        let t = task(0.4);
        assert!((expected_std_bruteforce(&t, &certain).unwrap() - std_exact(&t, &certain)).abs() < 1e-12);

        let halves = [c(0, 0.0, 1.0, 0.5), c(1, PI, 1.0, 0.5)];
        let e = expected_std_bruteforce(&task(1.0), &halves).unwrap();
        assert!((e - 0.25 * LN_2).abs() < 1e-12);

        let one = [c(0, 0.0, 1.0, 0.5)];
        let e = expected_std_bruteforce(&task(0.0), &one).unwrap();
        assert!((e - 0.5 * LN_2).abs() < 1e-12);
    }

    #[test]
    fn oracle_refuses_large_sets() {
        let many: Vec<_> = (0..21).map(|i| c(i, i as f64 * 0.1, 1.0, 0.5)).collect();
        assert!(matches!(expected_std_bruteforce(&task(0.5), &many), Err(Error::OracleCapExceeded { workers: 21, .. })));
    }
}
