//! Structured high-dimensional estimators.
pub mod bandable;
pub mod dtrace;
pub mod lowrank;

pub use bandable::{bandable_covariance, block_truncated, embed, BandableConfig};
pub use dtrace::{dtrace_precision, DtraceConfig};
pub use lowrank::{lowrank_covariance, TracePenaltyConfig};
