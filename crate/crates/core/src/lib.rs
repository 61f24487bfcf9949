//! Reliable, diversity-aware assignment of workers to spatial tasks.
//!
//! Each worker answers with some confidence, approaches a task from some
//! direction and arrives at some time. An assignment is judged on two goals:
//! the weakest task's reliability (chance that at least one of its workers
//! answers) and the summed expected spatial/temporal diversity of answers.

pub mod diversity;
pub mod entropy;
pub mod error;
pub mod harness;
pub mod index;
pub mod model;
pub mod objective;
pub mod reliability;
pub mod solvers;

pub use error::{Error, Result};
pub use model::{CandidatePair, Contribution, Instance, Point, Task, TaskId, WaitPolicy, Worker, WorkerId};
pub use objective::{objective, Assignment, ObjectiveVector};
