//! Hypergraph neural network engine for relational fake news detection.
//!
//! News pieces become nodes of a hypergraph whose hyperedges group news that
//! were shared by the same user, engaged with in the same time bucket, or that
//! mention the same named entity. Each node starts from its content feature
//! fused with an encoding of its propagation tree, and a dual-level attention
//! network (members to hyperedge, incident hyperedges to node) refines the
//! node states before a two-way classifier labels news as fake or true.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: dataset model, on-disk formats, splitting and synthetic data.
//! - [`hypergraph`]: hyperedge construction, incidence structure, statistics
//!   and clique expansion.
//! - [`tree_encoder`]: mean-aggregation tree encoder and the skip-connection
//!   fusion producing initial node embeddings.
//! - [`attention`]: node-level and hyperedge-level attention layers and the
//!   classification head.
//! - [`train`]: loss, reverse-mode gradients, Adam, early stopping,
//!   checkpoints and the finite-difference gradient oracle.
//! - [`analysis`]: metrics, ablations, label sweeps, the clique-expansion
//!   baseline and user credibility analysis.

pub mod analysis;
pub mod attention;
pub mod baseline;
pub mod data;
pub mod error;
pub mod hypergraph;
pub mod model;
pub mod params;
pub mod scalar;
pub mod sparse;
pub mod train;
pub mod tree_encoder;

pub use analysis::{CredibilityRecord, Metrics};
pub use attention::{AttentionLayerParams, AttentionSnapshot, HeadParams};
pub use data::{Dataset, NewsItem, PropagationTree, Split, SyntheticConfig, TreeNode};
pub use error::{Error, Result};
pub use hypergraph::{Hyperedge, HyperedgeKind, Hypergraph, PlainGraph, TimeGranularity};
pub use model::{ModelParams, ModelShape};
pub use params::Parameters;
pub use scalar::{Precision, Scalar};
pub use train::{TrainConfig, TrainReport};
pub use tree_encoder::TreeEncoderParams;
