//! Exact minimal cutsets for first passage percolation maximal flows on `Z^d`.
//!
//! The crate builds lattice cylinders and slabs, samples reproducible capacity
//! fields, computes positive-capacity clusters, solves max-flow / min-cut
//! problems exactly (including the minimal cardinality among minimal capacity
//! cutsets), and runs Monte Carlo campaigns estimating the rescaled cutset size.
//!
//! Module map:
//!
//! - [`geometry`]: directions, hyperrectangles, cylinders, slabs, discretized
//!   boundaries.
//! - [`capacity`]: atomic capacity laws, counter-based capacity fields, the
//!   Bernoulli coupling and regime labelling.
//! - [`clusters`]: clusters of positive edges, exterior edge boundaries, the
//!   random height and the null cutset built from cluster boundaries.
//! - [`mincut`]: exact max-flow and lexicographic (capacity, cardinality)
//!   minimum cuts, plus the flow quantities on cylinders and slabs.
//! - [`experiments`]: campaigns, bootstrap statistics and diagnostics.
//! - [`cli`]: the `fpp` command line front end.

pub mod capacity;
pub mod cli;
pub mod clusters;
mod dinic;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod mincut;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
