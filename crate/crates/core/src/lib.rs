//! Deep fusion clustering for attributed graphs.
//!
//! An autoencoder over node attributes and a graph autoencoder over the
//! attributed graph are fused into one consensus embedding, which is trained
//! with a self-supervised clustering objective and finally clustered with
//! K-means. Everything runs on dense `f64` matrices with a small reverse-mode
//! tape, so gradients can be checked against finite differences.

pub mod ae;
pub mod cli;
pub mod cluster_eval;
pub mod error;
pub mod graph;
pub mod igae;
pub mod model;
pub mod numcore;
pub mod saif;
pub mod selfsup;
pub mod trainer;

pub use cluster_eval::{evaluate, kmeans, EvalReport};
pub use error::{DfcnError, Result};
pub use graph::{knn_heat_graph, sbm_synthesize, GraphData, SbmConfig, SparseAdjacency};
pub use model::{Architecture, ModelParams};
pub use numcore::{Matrix, Tape, Var};
pub use trainer::{train, TrainConfig, TrainOutcome, TrainReport};
