//! Simulation and analysis of distance-dependent energy transfer from
//! near-surface emitters to a two-dimensional acceptor, as seen through
//! time-correlated single-photon counting.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod fit;
pub mod flim;
pub mod inversion;
pub mod model;
pub mod plot;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
