//! Monte Carlo and exact-enumeration tools for the ferromagnetic Ising model and
//! its random-cluster representation on cubic boxes and slab graphs.

pub mod cli;
pub mod clusters;
pub mod configuration;
pub mod exactref;
pub mod graph;
pub mod observables;
pub mod sampler;
pub mod stats;

pub use clusters::{ClusterLabeling, UnionFind};
pub use configuration::{BondConfig, SpinConfig};
pub use graph::{build_cubic_box, build_slab, LatticeGraph, LatticeKind};
pub use sampler::{Boundary, CouplingState, ModelParams, Schedule};
pub use stats::{Estimate, Verdict};
