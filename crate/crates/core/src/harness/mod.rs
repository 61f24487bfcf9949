//! Instance generation, file formats, the reassignment simulator, the
//! number-partitioning encoding, reports and oracle self-checks.

pub mod generator;
pub mod io;
pub mod reduction;
pub mod report;
pub mod sim;
pub mod verify;

pub use generator::{generate, generate_instance, Distribution, GeneratorConfig};
pub use io::ingest_trajectories;
pub use reduction::{reduction_from_number_partition, NumberPartitionInstance};
pub use report::{export_report, ReportFormat};
pub use sim::{answer_accuracy, simulate_incremental, AnswerRecord, SimulationConfig, SimulationReport};
pub use verify::{run_suite, Suite, VerifyReport};
