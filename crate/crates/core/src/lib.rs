//! Skew products over expanding circle, baker and solenoid bases with
//! weakly contracting fibre maps: invariant and bony multi-graphs by pullback,
//! Lyapunov and Kingman rate estimates, SRB measures, topological pressure
//! and equilibrium states lifted to invariant graphs.

// `!(a < b)` is used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ergodic;
pub mod error;
pub mod base;
pub mod cli;
pub mod config;
pub mod fiber_maps;
pub mod graph;
pub mod system;
pub mod thermo;

pub use error::{Error, Result};
