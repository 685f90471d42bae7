use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{GraphData, SparseAdjacency};
use crate::error::{DfcnError, Result};
use crate::numcore::Matrix;

/// Parameters of a planted-partition graph with Gaussian node attributes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    /// Nodes per block; the block count is `sizes.len()`.
    pub sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub attr_dim: usize,
    /// Distance between any two block centers in attribute space.
    pub attr_sep: f64,
    pub seed: u64,
}

impl SbmConfig {
    /// Three balanced blocks of 50, the fixture used throughout the test suite.
    pub fn standard(seed: u64) -> Self {
        SbmConfig {
            sizes: vec![50, 50, 50],
            p_in: 0.5,
            p_out: 0.02,
            attr_dim: 10,
            attr_sep: 8.0,
            seed,
        }
    }
}

/// Attribute center of block `c`.
///
/// With `d >= K` the centers sit on scaled coordinate axes so every pair is
/// exactly `sep` apart; otherwise they are spaced `sep` apart along the first axis.
fn block_center(c: usize, k: usize, d: usize, sep: f64) -> Vec<f64> {
    let mut center = vec![0.0; d];
    if d >= k {
        center[c] = sep / std::f64::consts::SQRT_2;
    } else if d > 0 {
        center[0] = c as f64 * sep;
    }
    center
}

/// Samples a stochastic block model with unit-variance Gaussian attributes.
/// Nodes are ordered block by block.
pub fn sbm_synthesize(cfg: &SbmConfig) -> Result<GraphData> {
    let k = cfg.sizes.len();
    if k < 2 {
        return Err(DfcnError::Parameter(format!("need at least 2 blocks, got {k}")));
    }
    if cfg.sizes.iter().any(|&s| s == 0) {
        return Err(DfcnError::Parameter("block sizes must be positive".into()));
    }
    if !(0.0 <= cfg.p_out && cfg.p_out < cfg.p_in && cfg.p_in <= 1.0) {
        return Err(DfcnError::Parameter(format!(
            "need 0 <= p_out < p_in <= 1, got p_in = {}, p_out = {}",
            cfg.p_in, cfg.p_out
        )));
    }
    if cfg.attr_dim == 0 || !cfg.attr_sep.is_finite() || cfg.attr_sep < 0.0 {
        return Err(DfcnError::Parameter("attr_dim must be positive and attr_sep finite and >= 0".into()));
    }

    let labels: Vec<usize> = cfg
        .sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat(c).take(s))
        .collect();
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] { cfg.p_in } else { cfg.p_out };
            // always draw so the stream does not depend on p
            let u: f64 = rng.random();
            if u < p {
                edges.push((i, j));
            }
        }
    }
    let adj = SparseAdjacency::from_edges(n, edges)?;

    let centers: Vec<Vec<f64>> = (0..k).map(|c| block_center(c, k, cfg.attr_dim, cfg.attr_sep)).collect();
    let mut x = Matrix::zeros(n, cfg.attr_dim);
    for (i, &c) in labels.iter().enumerate() {
        for (v, &mu) in x.row_mut(i).iter_mut().zip(&centers[c]) {
            let noise: f64 = StandardNormal.sample(&mut rng);
            *v = mu + noise;
        }
    }

    GraphData::new(x, adj, Some(labels), k)
}
