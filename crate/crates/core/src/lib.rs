//! Decentralized consensus-optimization toolkit: primal-dual solvers over
//! static and time-varying networks, resource-sharing via dual consensus,
//! cone/prox calculus, mixing-matrix simulation, convergence-bound
//! certificates, and a distributed-SVM benchmark harness.

pub mod catalog;
pub mod cli;
pub mod config;
pub mod cones_prox;
pub mod dpda_dynamic;
pub mod dpda_resource;
pub mod dpda_static;
pub mod dual_bound;
pub mod error;
pub mod experiments;
pub mod metrics_bounds;
pub mod network;
pub mod oracle;
pub mod stacked;

pub use error::{Error, Result};
