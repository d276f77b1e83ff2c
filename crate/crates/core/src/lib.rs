//! Individually fair graph clustering.
//!
//! A symmetric nonnegative tri-factorization `A ~ H W H^T` is regularized by
//! a contrastive graph over sensitive-group labels, pulling different-group
//! nodes into shared clusters and pushing same-group nodes apart. The crate
//! covers the data model and file formats ([`graph`]), the contrastive
//! Laplacian ([`contrastive`]), the multiplicative-update solver
//! ([`solver`]), quality and fairness scores ([`metrics`]), a planted-block
//! benchmark generator ([`sbm`]) and a lambda/k sweep driver ([`sweep`]).

pub mod contrastive;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod sbm;
pub mod solver;
pub mod sweep;

pub use contrastive::{build_contrastive, ContrastiveOptions, ContrastiveSystem, LaplacianSplit};
pub use error::{Error, Result};
pub use graph::{ClusterLabels, Graph, GroupAssignment};
pub use metrics::{evaluate, MetricsReport};
pub use sbm::{generate, SbmSpec};
pub use solver::{fit, FactorPair, RunResult, SolverConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
