//! Student-t soft assignments, the sharpened target distribution, and KL objectives.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{DfcnError, Result};
use crate::numcore::{kl_value, student_kernel_values, Matrix, Tape, Var};

/// Degrees of freedom used unless configured otherwise.
pub const DEFAULT_DOF: f64 = 1.0;

/// Cluster centers in the embedding space plus the kernel's degrees of freedom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Centers {
    /// K x d'
    pub u: Matrix,
    pub dof: f64,
}

impl Centers {
    pub fn new(u: Matrix, dof: f64) -> Result<Self> {
        if u.rows() < 2 {
            return Err(DfcnError::Parameter(format!("need at least 2 centers, got {}", u.rows())));
        }
        if !(dof > 0.0) || !u.is_finite() {
            return Err(DfcnError::Parameter("centers must be finite with positive degrees of freedom".into()));
        }
        Ok(Centers { u, dof })
    }

    pub fn k(&self) -> usize {
        self.u.rows()
    }
}

/// The four row-stochastic N x K tables used during self-supervision.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentSet {
    /// From the consensus embedding.
    pub q: Matrix,
    /// From the graph autoencoder latent.
    pub q_igae: Matrix,
    /// From the autoencoder latent.
    pub q_ae: Matrix,
    pub p: Matrix,
    pub dof: f64,
}

/// `q_ij ∝ (1 + |z_i - u_j|^2 / v)^(-(v + 1) / 2)`, normalized per row.
pub fn soft_assign(z: &Matrix, centers: &Centers) -> Result<Matrix> {
    if z.cols() != centers.u.cols() {
        return Err(DfcnError::shape("soft_assign", z.shape(), centers.u.shape()));
    }
    let mut q = student_kernel_values(z, &centers.u, centers.dof);
    for i in 0..q.rows() {
        let row = q.row_mut(i);
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
    Ok(q)
}

pub fn soft_assign_on(tape: &mut Tape, z: Var, centers: Var, dof: f64) -> Result<Var> {
    let w = tape.student_kernel(z, centers, dof)?;
    tape.row_normalize(w)
}

/// `p_ij ∝ q_ij^2 / f_j` with cluster frequencies `f_j = sum_i q_ij`, normalized per row.
///
/// A column with zero frequency contributes nothing (with a warning).
pub fn target_distribution(q: &Matrix) -> Matrix {
    let freq = q.col_sums();
    let dead = freq.iter().filter(|&&f| f <= 0.0).count();
    if dead > 0 {
        log::warn!("target distribution: {dead} cluster(s) have zero total assignment");
    }
    let mut p = Matrix::zeros(q.rows(), q.cols());
    for i in 0..q.rows() {
        let row = p.row_mut(i);
        for (j, (out, &qij)) in row.iter_mut().zip(q.row(i)).enumerate() {
            if freq[j] > 0.0 {
                *out = qij * qij / freq[j];
            }
        }
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|v| *v /= total);
        }
    }
    p
}

fn check_tables(tables: &[&Matrix]) -> Result<()> {
    let shape = tables[0].shape();
    for t in &tables[1..] {
        if t.shape() != shape {
            return Err(DfcnError::shape("kl", shape, t.shape()));
        }
    }
    Ok(())
}

/// `sum_ij p_ij ln(p_ij / ((q + q' + q'') / 3)_ij)`.
pub fn triplet_kl(p: &Matrix, q: &Matrix, q_igae: &Matrix, q_ae: &Matrix) -> Result<f64> {
    check_tables(&[p, q, q_igae, q_ae])?;
    let mix = Matrix::from_fn(p.rows(), p.cols(), |i, j| (q.get(i, j) + q_igae.get(i, j) + q_ae.get(i, j)) / 3.0);
    Ok(kl_value(p, &mix))
}

/// `sum_ij p_ij ln(p_ij / q_ij)`.
pub fn single_kl(p: &Matrix, q: &Matrix) -> Result<f64> {
    check_tables(&[p, q])?;
    Ok(kl_value(p, q))
}

pub fn triplet_kl_on(tape: &mut Tape, p: &Arc<Matrix>, q: Var, q_igae: Var, q_ae: Var) -> Result<Var> {
    let s1 = tape.add(q, q_igae)?;
    let s2 = tape.add(s1, q_ae)?;
    let mix = tape.scale(s2, 1.0 / 3.0);
    tape.kl_to_target(p, mix)
}

pub fn single_kl_on(tape: &mut Tape, p: &Arc<Matrix>, q: Var) -> Result<Var> {
    tape.kl_to_target(p, q)
}
