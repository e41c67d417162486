//! X2Graph: convert tabular rows into per-sample graphs using an external
//! knowledge base of feature-feature relations, train message-passing
//! networks on them, fuse models built from multiple knowledge bases, and
//! explain predictions by subgraph importance.
//!
//! Pipeline modules, in data-flow order:
//! - [`tabular`]: CSV ingestion, one-hot encoding, z-scoring
//! - [`kb`]: knowledge-base edge lists and vocabulary intersection
//! - [`convert`]: row -> graph conversion (shared vocabulary, node pruning)
//! - [`graphio`]: binary graph-dataset serialization
//! - [`gnn`]: GCN / mean-aggregation models with hand-rolled backprop
//! - [`trainer`]: folds, oversampling, Adam, early stopping, fusion
//! - [`eval`]: accuracy, Cohen's kappa, macro F1, one-vs-rest AUC, PR/AP
//! - [`explain`]: soft edge-mask explanations and feature importance
//! - [`synth`]: planted-signal synthetic benchmark generator
//! - [`experiment`]: manifest-driven cross-validated experiments

pub mod convert;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod explain;
pub mod gnn;
pub mod graphio;
pub mod kb;
pub mod synth;
pub mod tabular;
pub mod trainer;

pub use convert::{convert_row, convert_table, ConversionConfig, GraphDataset, SampleGraph};
pub use error::{Result, X2gError};
pub use eval::{evaluate, EvalReport};
pub use gnn::{Arch, GraphModel};
pub use kb::{FeatureVocabulary, KnowledgeBase};
pub use tabular::TabularDataset;
