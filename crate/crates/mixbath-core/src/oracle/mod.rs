//! Independent references: the memory-kernel master equation and an explicitly discretized bath.

pub mod discrete;
pub mod volterra;

pub use discrete::{discrete_bath_solve, DiscreteBath};
pub use volterra::{build_kernels, volterra_solve, MemoryKernels};
