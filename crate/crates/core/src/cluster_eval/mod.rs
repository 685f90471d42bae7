//! K-means, Kuhn-Munkres matching, and clustering quality metrics.

mod hungarian;
mod kmeans;
mod metrics;

pub use hungarian::{kuhn_munkres, Assignment};
pub use kmeans::{assign, kmeans, kmeans_with, KMeansOptions, KMeansResult};
pub use metrics::{
    accuracy, ari, best_mapping, contingency, evaluate, macro_f1, nmi, nmi_with, EvalReport, NmiNorm,
};
