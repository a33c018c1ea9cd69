//! Streaming Nyström sketches for kernel ridge regression, driven by
//! ridge-leverage-score sampling.
//!
//! The main entry points are [`pipeline::batch_exact`] for the offline
//! baseline, and [`pipeline::ink_estimate_run`] / [`pipeline::ink_oracle_run`]
//! for the single-pass algorithms. [`pipeline::SketchState`] drives a stream
//! one point at a time.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evaluation;
pub mod kernel;
pub mod leverage;
pub mod numerics;
pub mod nystrom;
pub mod par;
pub mod pipeline;
pub mod sampler;

pub use error::{Error, Result};
pub use kernel::{Dataset, KernelSpec};
pub use nystrom::{NystromFactor, Selection};
pub use sampler::{Dictionary, RngHandle};
