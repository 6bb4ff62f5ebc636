//! Toolkit for building intra-AS graph corpora and generative models over them.
//!
//! The pipeline: ingest router-level topology files into per-AS graphs,
//! extract size-bounded training subgraphs with a recursive modularity
//! split, train a sequential graph generative model, synthesize graphs
//! (from the model or from preferential-attachment baselines), and score
//! distributional realism with a Wasserstein-kernel MMD bootstrap.

pub mod baselines;
pub mod cli;
pub mod community;
pub mod dggm;
pub mod eval;
pub mod graph;
pub mod ingest;
pub mod manifest;
pub mod metrics;
pub mod synth;
pub mod util;

pub use graph::Graph;
