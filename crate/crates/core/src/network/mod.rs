//! Graphs, mixing-matrix processes and consensus-approximation operators.

mod graph;
mod mixing;

pub use graph::{generate_graph, generate_graph_best_effort, Graph};
pub use mixing::{
    exact_consensus_projection, metropolis_matrix, mix_once, mixing_constants, multi_consensus,
    ActivationPolicy, MixingConstants, MixingProcess,
};
