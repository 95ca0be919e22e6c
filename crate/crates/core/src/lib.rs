//! Bayesian spatially clustered regression with spanning-tree partition priors.
//!
//! The unit square is cut into `K × K` blocks; non-empty blocks form a mesh
//! graph. A random spanning tree of that graph, with `k - 1` of its edges
//! removed, induces a contiguous partition of blocks, and each cluster carries
//! its own linear-regression coefficients. Inference runs a reversible-jump
//! Metropolis–Hastings sampler over the tree and the cut set with the
//! coefficients integrated out.

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod grid;
pub mod io;
pub mod likelihood;
pub mod metrics;
pub mod predict;
pub mod sampler;
pub mod tree;

pub use config::{parse_config, RunConfig};
pub use data::{Dataset, Location};
pub use error::{Error, Result};
pub use experiment::{select_hyperparams, HyperParams, RateConstants, UShapeTruth};
pub use graph::{Graph, UnionFind};
pub use grid::BlockGrid;
pub use likelihood::{ClusterStats, Likelihood, ModelConfig};
pub use metrics::ReferencePartition;
pub use predict::{PredictionRequest, PredictiveDistribution};
pub use sampler::{ChainOutput, ChainState, MoveProbs, PosteriorSample, Sampler, SamplerConfig};
pub use tree::{EdgeWeights, SpanningTree, TreePartition};
