use serde::{Deserialize, Serialize};

use super::SparseAdjacency;
use crate::error::{DfcnError, Result};
use crate::numcore::Matrix;

/// Heat-kernel bandwidth `t` in `exp(-|x_i - x_j|^2 / t)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Mean squared distance over all ordered pairs `i != j`.
    #[default]
    Auto,
    Fixed(f64),
}

fn pairwise_sq_dists(x: &Matrix) -> Matrix {
    let n = x.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            d.set(i, j, v);
            d.set(j, i, v);
        }
    }
    d
}

/// Heat-kernel similarity matrix for all pairs; the diagonal is 1.
pub fn heat_kernel(x: &Matrix, bandwidth: Bandwidth) -> Result<Matrix> {
    let dists = pairwise_sq_dists(x);
    let t = resolve_bandwidth(&dists, bandwidth)?;
    Ok(dists.map(|d| (-d / t).exp()))
}

fn resolve_bandwidth(dists: &Matrix, bandwidth: Bandwidth) -> Result<f64> {
    let n = dists.rows();
    let t = match bandwidth {
        Bandwidth::Fixed(t) => t,
        Bandwidth::Auto => {
            if n < 2 {
                1.0
            } else {
                dists.sum() / (n * (n - 1)) as f64
            }
        }
    };
    if !(t > 0.0 && t.is_finite()) {
        // all points identical under Auto; any positive bandwidth gives the same ranking
        if bandwidth == Bandwidth::Auto {
            return Ok(1.0);
        }
        return Err(DfcnError::Parameter(format!("heat-kernel bandwidth must be positive, got {t}")));
    }
    Ok(t)
}

/// Directed top-`k` neighbor lists under the heat kernel, ties to the smaller index.
///
/// The kernel is monotone in distance, so neighbors are ranked by squared
/// distance directly; this keeps far-apart pairs distinct even when their
/// similarities underflow to zero.
pub fn knn_lists(x: &Matrix, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = x.rows();
    if k == 0 || k >= n {
        return Err(DfcnError::Parameter(format!(
            "knn needs 1 <= k < N, got k = {k} with N = {n}"
        )));
    }
    let dists = pairwise_sq_dists(x);
    Ok((0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| dists.get(i, a).total_cmp(&dists.get(i, b)).then(a.cmp(&b)));
            others.truncate(k);
            others
        })
        .collect())
}

/// Binary KNN graph under the heat kernel, symmetrized by OR.
pub fn knn_heat_graph(x: &Matrix, k: usize, bandwidth: Bandwidth) -> Result<SparseAdjacency> {
    if !x.is_finite() {
        return Err(DfcnError::Validation("attribute matrix contains non-finite values".into()));
    }
    // validates a fixed bandwidth even though ranking does not depend on it
    resolve_bandwidth(&pairwise_sq_dists(x), bandwidth)?;
    let lists = knn_lists(x, k)?;
    let edges = lists
        .iter()
        .enumerate()
        .flat_map(|(i, nbrs)| nbrs.iter().map(move |&j| (i, j)));
    SparseAdjacency::from_edges(x.rows(), edges)
}
