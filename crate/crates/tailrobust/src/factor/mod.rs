//! Factor-model estimation: robust POET and approximate-FDP curves.
pub mod fdp;
pub mod poet;

pub use fdp::{estimate_fdp, FdpConfig, FdpCurve};
pub use poet::{robust_mean, robust_poet, FactorFit};
