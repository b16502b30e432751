//! Shared-memory parallel kernels with a space/parallelism/locality
//! trade-off, plus the instrumentation to verify it.
//!
//! The library has three layers:
//!
//! 1. **Storage** ([`matrix`], [`tensor`], [`pool`]) — power-of-two dense
//!    matrices and hypercube tensors with O(1) quadrant/orthant views, all
//!    backed by a buffer pool addressed as `(buffer, element)`.
//! 2. **Kernels** ([`mm`], [`rmm`], [`tc`], [`reshape`]) — builders that
//!    express each algorithm as a fork-join task tree. A kernel family
//!    never changes its multiply-add count; extra output planes only trade
//!    space for critical-path length.
//! 3. **Measurement** ([`engine`], [`cachesim`], [`analytics`]) — a
//!    deterministic instrumented executor (work, span, peak space, fork
//!    count, access trace), a static disjoint-write race checker, a rayon
//!    executor for wall time, an LRU ideal-cache simulator for Q1, and
//!    closed-form recurrence predictions to compare against.
//!
//! The [`harness`] module wires these together for the CLI and test suites.

pub mod analytics;
pub mod cachesim;
pub mod config;
pub mod engine;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod mm;
pub mod pool;
pub mod reshape;
pub mod rmm;
pub mod scalar;
pub mod task;
pub mod tc;
pub mod tensor;

pub use config::KernelConfig;
pub use error::{Error, Result};
pub use scalar::{Int31, Scalar};
