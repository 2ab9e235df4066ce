//! Spatially weighted concave pairwise fusion for subgroup regression on
//! areal units with repeated measurements.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command line
//! and parallel replicate harnesses live in the companion `sasa` crate.

#![no_std]
// `!(x > 0.0)` style checks are how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;

pub mod error;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod penalty;
pub mod simgen;
pub mod solver;
pub mod tuning;
pub mod weights;

pub use error::{Result, SasaError};
pub use graph::{build_grid_adjacency, neighbor_orders, AdjacencyGraph, Contiguity, NeighborOrders};
pub use model::{validate, Coefficients, Dataset, LocationBlock, Partition, SolverConfig};
pub use oracle::{oracle_coefficients, oracle_fit, OracleFit};
pub use penalty::{scad_prox, scad_value, FusionPenalty, Scad};
pub use solver::{fit, initialize, Admm, AdmmState, InitMethod, SasaFit};
pub use weights::{compute_weights, WeightKind, WeightMatrix, WeightSpec};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
