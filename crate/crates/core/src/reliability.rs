//! Reliability of a worker set and the possible-world probabilities that
//! underlie every expectation in the crate.

/// Probability that at least one worker succeeds: `1 - ∏(1 - p)`.
pub fn reliability(confidences: &[f64]) -> f64 {
    1.0 - confidences.iter().map(|p| 1.0 - p).product::<f64>()
}

/// `Σ -ln(1 - p)`, the additive form of reliability. A certain worker
/// (`p = 1`) saturates the sum at positive infinity.
pub fn log_reliability(confidences: &[f64]) -> f64 {
    confidences.iter().map(|&p| worker_log_weight(p)).sum()
}

/// `-ln(1 - p)` for a single worker.
pub fn worker_log_weight(p: f64) -> f64 {
    if p >= 1.0 {
        f64::INFINITY
    } else {
        -(-p).ln_1p()
    }
}

/// Probability of the world in which exactly the flagged workers succeed.
pub fn possible_world_prob(succeeds: &[bool], confidences: &[f64]) -> f64 {
    debug_assert_eq!(succeeds.len(), confidences.len());
    succeeds.iter().zip(confidences).map(|(&s, &p)| if s { p } else { 1.0 - p }).product()
}

/// A subset of a task's workers that succeed, with its probability. Bit `i`
/// of `members` refers to the `i`-th worker of the enumerated list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PossibleWorld {
    pub members: u64,
    pub probability: f64,
}

impl PossibleWorld {
    pub fn contains(&self, i: usize) -> bool {
        self.members >> i & 1 == 1
    }
}

/// Enumerates all `2^r` worlds of a worker list. Callers cap `r`.
pub fn possible_worlds(confidences: &[f64]) -> impl Iterator<Item = PossibleWorld> + '_ {
    let r = confidences.len();
    assert!(r < 64, "cannot enumerate 2^{r} worlds");
    (0..1u64 << r).map(move |members| {
        let probability = confidences.iter().enumerate().map(|(i, &p)| if members >> i & 1 == 1 { p } else { 1.0 - p }).product();
        PossibleWorld { members, probability }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reliability_examples() {
        assert!((reliability(&[0.9, 0.8]) - 0.98).abs() < 1e-12);
        assert_eq!(reliability(&[]), 0.0);
        assert_eq!(reliability(&[1.0, 0.3]), 1.0);
    }

    #[test]
    fn log_reliability_examples() {
        assert!((log_reliability(&[0.5]) - 2f64.ln()).abs() < 1e-12);
        assert_eq!(log_reliability(&[]), 0.0);
        let direct = -(1.0 - reliability(&[0.9, 0.8])).ln();
        assert!((log_reliability(&[0.9, 0.8]) - direct).abs() < 1e-12);
        assert_eq!(log_reliability(&[1.0, 0.2]), f64::INFINITY);
    }

    #[test]
    fn world_probability_examples() {
        let ps = [0.7, 0.4];
        assert!((possible_world_prob(&[true, false], &ps) - 0.42).abs() < 1e-12);
        assert!((possible_world_prob(&[false, false], &ps) - 0.18).abs() < 1e-12);
        let total: f64 = possible_worlds(&ps).map(|w| w.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn log_and_plain_reliability_agree(ps in prop::collection::vec(0.0f64..0.5, 0..10)) {
            let lr = log_reliability(&ps);
            let r = reliability(&ps);
            prop_assert!((lr - (-(1.0 - r).ln())).abs() <= 1e-12);
        }

        #[test]
        fn adding_a_worker_adds_its_weight(ps in prop::collection::vec(0.0f64..0.99, 0..12), p in 0.0f64..0.99) {
            let before = log_reliability(&ps);
            let mut with = ps.clone();
            with.push(p);
            prop_assert!((log_reliability(&with) - before - worker_log_weight(p)).abs() <= 1e-12);
        }

        #[test]
        fn worlds_sum_to_one(ps in prop::collection::vec(0.0f64..=1.0, 0..14)) {
            let total: f64 = possible_worlds(&ps).map(|w| w.probability).sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }
    }
}
