//! Monte Carlo data generation and the benchmark harness.
pub mod bench;
pub mod generate;

pub use bench::{rme, run_dimension_sweep, run_table, BenchmarkReport, Method, SweepConfig, TableConfig};
pub use generate::{generate, CovStructure, GenModel, ModelKind, StructureKind};
