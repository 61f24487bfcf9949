//! Grid index for fast valid-pair retrieval, and its cost model.

pub mod cost;
pub mod grid;

pub use cost::{estimate_fractal_dimension, solve_cell_size, update_cost, FractalEstimate};
pub use grid::{Cell, CellId, CostParams, GridIndex};
