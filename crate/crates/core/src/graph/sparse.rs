use serde::{Deserialize, Serialize};

use crate::error::{DfcnError, Result};
use crate::numcore::Matrix;

/// Square sparse matrix in compressed-row layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseAdjacency {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

/// Which degree matrix scales `A + I` during normalization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeMode {
    /// Degrees of `A + I` (renormalization trick).
    #[default]
    WithSelfLoops,
    /// Degrees of `A` alone. A node of degree 0 gets a zero scale factor.
    Raw,
}

impl SparseAdjacency {
    /// Builds an `n x n` matrix from `(row, col, value)` triplets.
    /// Duplicate coordinates are summed.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(DfcnError::Validation(format!(
                    "entry ({i}, {j}) outside a {n}x{n} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(DfcnError::Validation(format!("entry ({i}, {j}) is not finite")));
            }
            rows[i].push((j, v));
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                if col_indices.len() > *row_offsets.last().unwrap() && *col_indices.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseAdjacency {
            n,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Binary symmetric adjacency from an undirected edge list. Self-loops are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut triplets = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(DfcnError::Validation(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if u != v {
                triplets.push((u, v, 1.0));
                triplets.push((v, u, 1.0));
            }
        }
        let mut a = SparseAdjacency::from_triplets(n, triplets)?;
        // duplicates in the list must not produce weights above 1
        a.values.iter_mut().for_each(|v| *v = 1.0);
        Ok(a)
    }

    pub fn identity(n: usize) -> Self {
        SparseAdjacency {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).1.iter().sum()).collect()
    }

    /// Undirected edges `(u, v)` with `u < v`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for &j in self.row(i).0 {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).all(|(&j, &v)| self.get(j, i) == v)
        })
    }

    fn check_adjacency(&self) -> Result<()> {
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if i == j {
                    return Err(DfcnError::Validation(format!("adjacency has a self-loop at node {i}")));
                }
                if v != 1.0 {
                    return Err(DfcnError::Validation(format!(
                        "adjacency entry ({i}, {j}) is {v}, expected 0/1"
                    )));
                }
            }
        }
        if !self.is_symmetric() {
            return Err(DfcnError::Validation("adjacency is not symmetric".into()));
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m.set(i, j, v);
            }
        }
        m
    }

    /// Sparse times dense.
    pub fn spmm(&self, h: &Matrix) -> Result<Matrix> {
        if h.rows() != self.n {
            return Err(DfcnError::shape("spmm", (self.n, self.n), h.shape()));
        }
        let c = h.cols();
        let mut out = Matrix::zeros(self.n, c);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let out_row = out.row_mut(i);
            for (&j, &v) in cols.iter().zip(vals) {
                for (o, &x) in out_row.iter_mut().zip(h.row(j)) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }

    /// Transposed sparse times dense, used for the backward pass.
    pub fn spmm_transpose(&self, g: &Matrix) -> Result<Matrix> {
        if g.rows() != self.n {
            return Err(DfcnError::shape("spmm_transpose", (self.n, self.n), g.shape()));
        }
        let c = g.cols();
        let mut out = Matrix::zeros(self.n, c);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let src = &g.data()[i * c..(i + 1) * c];
                for (o, &x) in out.row_mut(j).iter_mut().zip(src) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` for a binary symmetric adjacency without self-loops.
pub fn normalize_adjacency(adj: &SparseAdjacency, mode: DegreeMode) -> Result<SparseAdjacency> {
    adj.check_adjacency()?;
    let n = adj.n();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d = adj.degree(i) as f64 + if mode == DegreeMode::WithSelfLoops { 1.0 } else { 0.0 };
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut triplets = Vec::with_capacity(adj.nnz() + n);
    for i in 0..n {
        triplets.push((i, i, inv_sqrt[i] * inv_sqrt[i]));
        for &j in adj.row(i).0 {
            triplets.push((i, j, inv_sqrt[i] * inv_sqrt[j]));
        }
    }
    SparseAdjacency::from_triplets(n, triplets)
}
