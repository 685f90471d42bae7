//! Graph containers, adjacency normalization, KNN graph construction, and a block-model generator.

mod knn;
mod sbm;
mod sparse;

use std::sync::Arc;

pub use knn::{heat_kernel, knn_heat_graph, knn_lists, Bandwidth};
pub use sbm::{sbm_synthesize, SbmConfig};
pub use sparse::{normalize_adjacency, DegreeMode, SparseAdjacency};

use crate::error::{DfcnError, Result};
use crate::numcore::Matrix;

/// Attributed graph ready for training.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphData {
    /// Node attributes, N x d.
    pub x: Matrix,
    /// Binary symmetric adjacency with an empty diagonal.
    pub adj: SparseAdjacency,
    /// Normalized adjacency used by every propagation step.
    pub adj_norm: Arc<SparseAdjacency>,
    pub labels: Option<Vec<usize>>,
    /// Number of clusters.
    pub k: usize,
}

impl GraphData {
    /// Validates inputs and normalizes with self-loop degrees.
    pub fn new(x: Matrix, adj: SparseAdjacency, labels: Option<Vec<usize>>, k: usize) -> Result<Self> {
        Self::with_degree_mode(x, adj, labels, k, DegreeMode::WithSelfLoops)
    }

    pub fn with_degree_mode(
        x: Matrix,
        adj: SparseAdjacency,
        labels: Option<Vec<usize>>,
        k: usize,
        mode: DegreeMode,
    ) -> Result<Self> {
        let n = x.rows();
        if adj.n() != n {
            return Err(DfcnError::Validation(format!(
                "adjacency has {} nodes but attributes have {n} rows",
                adj.n()
            )));
        }
        if !x.is_finite() {
            return Err(DfcnError::Validation("attribute matrix contains non-finite values".into()));
        }
        if k < 2 {
            return Err(DfcnError::Validation(format!("cluster count must be at least 2, got {k}")));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(DfcnError::Validation(format!("{} labels for {n} nodes", l.len())));
            }
            if let Some(bad) = l.iter().find(|&&c| c >= k) {
                return Err(DfcnError::Validation(format!("label {bad} outside 0..{k}")));
            }
        }
        let adj_norm = Arc::new(normalize_adjacency(&adj, mode)?);
        Ok(GraphData {
            x,
            adj,
            adj_norm,
            labels,
            k,
        })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }
}
