//! Cell-size selection: correlation fractal dimension of the data and the
//! update-cost model it feeds.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractalEstimate {
    /// Correlation dimension, clamped to `[0.5, 2]`.
    pub d2: f64,
    /// Too few distinct scales to fit; `d2` is the uniform fallback.
    pub degenerate: bool,
}

/// Box-counting estimate of the correlation fractal dimension: the slope of
/// `ln Σ c(c-1)` against `ln r` over boxes of side `r = 2^-k`.
pub fn estimate_fractal_dimension(points: &[Point]) -> Result<FractalEstimate> {
    if points.len() < 2 {
        return Err(Error::EmptyInput("fractal dimension needs at least two points"));
    }
    let fallback = FractalEstimate { d2: 2.0, degenerate: true };
    let max_level = ((points.len() as f64).log2() / 2.0).floor().max(2.0) as u32;
    let mut samples = Vec::new();
    let mut boxes = std::collections::HashMap::new();
    for level in 1..=max_level {
        let cells = (1u64 << level) as f64;
        boxes.clear();
        for p in points {
            let cx = ((p.x * cells).floor() as i64).clamp(0, cells as i64 - 1);
            let cy = ((p.y * cells).floor() as i64).clamp(0, cells as i64 - 1);
            *boxes.entry((cx, cy)).or_insert(0u64) += 1;
        }
        let sum: u64 = boxes.values().map(|&c| c * (c - 1)).sum();
        if sum == 0 {
            break;
        }
        samples.push((-(level as f64) * std::f64::consts::LN_2, (sum as f64).ln()));
    }
    let first = points[0];
    if points.iter().all(|p| *p == first) || samples.len() < 2 {
        return Ok(fallback);
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    Ok(FractalEstimate { d2: (sxy / sxx).clamp(0.5, 2.0), degenerate: false })
}

/// Expected cost of an update: `π(L+η)²/η² + (N-1)·(π(L+η)²)^{D₂/2}`.
pub fn update_cost(l_max: f64, eta: f64, d2: f64, n: usize) -> f64 {
    let area = PI * (l_max + eta).powi(2);
    area / (eta * eta) + (n as f64 - 1.0) * area.powf(d2 / 2.0)
}

fn stationarity_gap(l_max: f64, d2: f64, n: usize, eta: f64) -> f64 {
    (l_max + eta).powf(d2 - 2.0) * eta.powi(3) - 2.0 * PI.powf(1.0 - d2 / 2.0) * l_max / (d2 * (n as f64 - 1.0))
}

/// The cell size minimising [`update_cost`], by bisection on `(1e-6, 1)`.
/// The stationarity condition is increasing in `η`, so the root is unique.
pub fn solve_cell_size_bisection(l_max: f64, d2: f64, n: usize) -> Result<f64> {
    check_cost_inputs(l_max, d2, n)?;
    let (mut lo, mut hi) = (1e-6, 1.0);
    if stationarity_gap(l_max, d2, n, lo) >= 0.0 {
        return Ok(lo);
    }
    if stationarity_gap(l_max, d2, n, hi) <= 0.0 {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if stationarity_gap(l_max, d2, n, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The cell size minimising [`update_cost`]; closed form for `D₂ = 2`.
pub fn solve_cell_size(l_max: f64, d2: f64, n: usize) -> Result<f64> {
    check_cost_inputs(l_max, d2, n)?;
    if d2 == 2.0 {
        return Ok((l_max / (n as f64 - 1.0)).cbrt());
    }
    solve_cell_size_bisection(l_max, d2, n)
}

fn check_cost_inputs(l_max: f64, d2: f64, n: usize) -> Result<()> {
    if !(l_max.is_finite() && l_max > 0.0) {
        return Err(Error::InvalidConfig(format!("L_max must be positive, got {l_max}")));
    }
    if !(d2.is_finite() && d2 > 0.0) {
        return Err(Error::InvalidConfig(format!("D2 must be positive, got {d2}")));
    }
    if n < 2 {
        return Err(Error::InvalidConfig(format!("cost model needs N >= 2, got {n}")));
    }
    Ok(())
}
