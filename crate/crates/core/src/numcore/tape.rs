//! Reverse-mode differentiation over dense matrices.
//!
//! Every forward op appends a node holding its value and the ids of its
//! inputs; `backward` walks the nodes in reverse insertion order, which is a
//! valid reverse topological order because inputs always exist before the
//! node that consumes them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{DfcnError, Result};
use crate::graph::SparseAdjacency;

/// Floor applied to mixture probabilities inside the KL logarithm.
pub const KL_EPS: f64 = 1e-12;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Elementwise nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    /// 1x1 node times a matrix.
    ScalarMul(Var, Var),
    /// Adds a 1xc row to every row.
    AddRowBias(Var, Var),
    Activate(Var, Activation),
    Transpose(Var),
    RowSoftmax(Var),
    RowNormalize(Var),
    FrobeniusSq(Var),
    Spmm(Arc<SparseAdjacency>, Var),
    StudentKernel { z: Var, centers: Var, dof: f64 },
    KlToTarget { target: Arc<Matrix>, mix: Var },
}

struct Node {
    op: Op,
    value: Matrix,
}

/// Records matrix operations for one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`].
pub struct Gradients {
    adjoints: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of the root with respect to `var`; zeros if the root does not depend on it.
    pub fn wrt(&self, var: Var) -> Matrix {
        match &self.adjoints[var.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[var.0];
                Matrix::zeros(r, c)
            }
        }
    }

    pub fn get(&self, var: Var) -> Option<&Matrix> {
        self.adjoints[var.0].as_ref()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    fn push(&mut self, op: Op, value: Matrix) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Records an input. Parameters and constants are both leaves.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.push(Op::Sub(a, b), value))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).scale(factor);
        self.push(Op::Scale(a, factor), value)
    }

    pub fn scalar_mul(&mut self, s: Var, a: Var) -> Result<Var> {
        let Some(factor) = self.value(s).as_scalar() else {
            return Err(DfcnError::shape("scalar_mul", self.shape(s), self.shape(a)));
        };
        let value = self.value(a).scale(factor);
        Ok(self.push(Op::ScalarMul(s, a), value))
    }

    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ar, ac) = self.shape(a);
        let bs = self.shape(bias);
        if bs != (1, ac) {
            return Err(DfcnError::shape("add_row_bias", (ar, ac), bs));
        }
        let mut value = self.value(a).clone();
        let b = self.value(bias).data().to_vec();
        for i in 0..ar {
            for (x, y) in value.row_mut(i).iter_mut().zip(&b) {
                *x += y;
            }
        }
        Ok(self.push(Op::AddRowBias(a, bias), value))
    }

    pub fn activate(&mut self, a: Var, act: Activation) -> Var {
        if act == Activation::Identity {
            return a;
        }
        let value = self.value(a).map(|x| act.apply(x));
        self.push(Op::Activate(a, act), value)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(Op::Transpose(a), value)
    }

    pub fn row_softmax(&mut self, a: Var) -> Var {
        let value = self.value(a).row_softmax();
        self.push(Op::RowSoftmax(a), value)
    }

    /// Divides each row by its sum. Rows must have a nonzero sum.
    pub fn row_normalize(&mut self, a: Var) -> Result<Var> {
        let mut value = self.value(a).clone();
        for i in 0..value.rows() {
            let row = value.row_mut(i);
            let total: f64 = row.iter().sum();
            if total == 0.0 || !total.is_finite() {
                return Err(DfcnError::Contract(format!(
                    "row_normalize: row {i} sums to {total}"
                )));
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        Ok(self.push(Op::RowNormalize(a), value))
    }

    pub fn frobenius_sq(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).frobenius_sq());
        self.push(Op::FrobeniusSq(a), value)
    }

    pub fn spmm(&mut self, adj: &Arc<SparseAdjacency>, h: Var) -> Result<Var> {
        let value = adj.spmm(self.value(h))?;
        Ok(self.push(Op::Spmm(Arc::clone(adj), h), value))
    }

    /// Unnormalized Student-t kernel `(1 + |z_i - u_j|^2 / dof)^(-(dof + 1) / 2)`.
    pub fn student_kernel(&mut self, z: Var, centers: Var, dof: f64) -> Result<Var> {
        let (zm, um) = (self.value(z), self.value(centers));
        if zm.cols() != um.cols() {
            return Err(DfcnError::shape("student_kernel", zm.shape(), um.shape()));
        }
        if !(dof > 0.0) {
            return Err(DfcnError::Parameter(format!(
                "Student-t degrees of freedom must be positive, got {dof}"
            )));
        }
        let value = student_kernel_values(zm, um, dof);
        Ok(self.push(
            Op::StudentKernel {
                z,
                centers,
                dof,
            },
            value,
        ))
    }

    /// `sum_ij p_ij ln(p_ij / m_ij)` for a constant target `p` and a recorded mixture `m`.
    /// Terms with `p_ij = 0` contribute nothing; `m_ij` is floored at [`KL_EPS`].
    pub fn kl_to_target(&mut self, target: &Arc<Matrix>, mix: Var) -> Result<Var> {
        let m = self.value(mix);
        if m.shape() != target.shape() {
            return Err(DfcnError::shape("kl_to_target", target.shape(), m.shape()));
        }
        let value = Matrix::scalar(kl_value(target, m));
        Ok(self.push(
            Op::KlToTarget {
                target: Arc::clone(target),
                mix,
            },
            value,
        ))
    }

    /// Accumulates adjoints from a scalar `root` back to every node.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let shape = self.shape(root);
        if shape != (1, 1) {
            return Err(DfcnError::Contract(format!(
                "backward root must be scalar, got {}x{}",
                shape.0, shape.1
            )));
        }
        let mut adjoints: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        adjoints[root.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=root.0).rev() {
            let Some(g) = adjoints[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = g.matmul(&self.value(*b).transpose())?;
                    let db = self.value(*a).transpose().matmul(&g)?;
                    accumulate(&mut adjoints, *a, da);
                    accumulate(&mut adjoints, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut adjoints, *a, g.clone());
                    accumulate(&mut adjoints, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adjoints, *a, g.clone());
                    accumulate(&mut adjoints, *b, g.scale(-1.0));
                }
                Op::Scale(a, factor) => {
                    accumulate(&mut adjoints, *a, g.scale(*factor));
                }
                Op::ScalarMul(s, a) => {
                    let factor = self.scalar_value(*s);
                    let ds = g.hadamard(self.value(*a))?.sum();
                    accumulate(&mut adjoints, *s, Matrix::scalar(ds));
                    accumulate(&mut adjoints, *a, g.scale(factor));
                }
                Op::AddRowBias(a, bias) => {
                    let db = Matrix::from_vec(1, g.cols(), g.col_sums())?;
                    accumulate(&mut adjoints, *bias, db);
                    accumulate(&mut adjoints, *a, g.clone());
                }
                Op::Activate(a, act) => {
                    let x = self.value(*a);
                    let y = &node.value;
                    let mut da = g.clone();
                    for ((d, &xv), &yv) in da.data_mut().iter_mut().zip(x.data()).zip(y.data()) {
                        *d *= act.derivative(xv, yv);
                    }
                    accumulate(&mut adjoints, *a, da);
                }
                Op::Transpose(a) => {
                    accumulate(&mut adjoints, *a, g.transpose());
                }
                Op::RowSoftmax(a) => {
                    let s = &node.value;
                    let mut da = g.clone();
                    for i in 0..s.rows() {
                        let dot: f64 = g.row(i).iter().zip(s.row(i)).map(|(x, y)| x * y).sum();
                        for (d, &sv) in da.row_mut(i).iter_mut().zip(s.row(i)) {
                            *d = sv * (*d - dot);
                        }
                    }
                    accumulate(&mut adjoints, *a, da);
                }
                Op::RowNormalize(a) => {
                    let x = self.value(*a);
                    let y = &node.value;
                    let mut da = g.clone();
                    for i in 0..y.rows() {
                        let total: f64 = x.row(i).iter().sum();
                        let dot: f64 = g.row(i).iter().zip(y.row(i)).map(|(p, q)| p * q).sum();
                        for d in da.row_mut(i).iter_mut() {
                            *d = (*d - dot) / total;
                        }
                    }
                    accumulate(&mut adjoints, *a, da);
                }
                Op::FrobeniusSq(a) => {
                    let upstream = g.data()[0];
                    accumulate(&mut adjoints, *a, self.value(*a).scale(2.0 * upstream));
                }
                Op::Spmm(adj, h) => {
                    accumulate(&mut adjoints, *h, adj.spmm_transpose(&g)?);
                }
                Op::StudentKernel { z, centers, dof } => {
                    let (dz, du) =
                        student_kernel_grads(self.value(*z), self.value(*centers), *dof, &node.value, &g);
                    accumulate(&mut adjoints, *z, dz);
                    accumulate(&mut adjoints, *centers, du);
                }
                Op::KlToTarget { target, mix } => {
                    let upstream = g.data()[0];
                    let m = self.value(*mix);
                    let mut dm = Matrix::zeros(m.rows(), m.cols());
                    for ((d, &p), &q) in dm.data_mut().iter_mut().zip(target.data()).zip(m.data()) {
                        // derivative is zero where the floor is active
                        if p > 0.0 && q > KL_EPS {
                            *d = -upstream * p / q;
                        }
                    }
                    accumulate(&mut adjoints, *mix, dm);
                }
            }
            adjoints[idx] = Some(g);
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape()).collect();
        Ok(Gradients { adjoints, shapes })
    }
}

fn accumulate(adjoints: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut adjoints[v.0] {
        Some(existing) => {
            for (a, b) in existing.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn student_kernel_values(z: &Matrix, centers: &Matrix, dof: f64) -> Matrix {
    let exponent = -(dof + 1.0) / 2.0;
    Matrix::from_fn(z.rows(), centers.rows(), |i, j| {
        (1.0 + sq_dist(z.row(i), centers.row(j)) / dof).powf(exponent)
    })
}

fn student_kernel_grads(
    z: &Matrix,
    centers: &Matrix,
    dof: f64,
    w: &Matrix,
    g: &Matrix,
) -> (Matrix, Matrix) {
    let mut dz = Matrix::zeros(z.rows(), z.cols());
    let mut du = Matrix::zeros(centers.rows(), centers.cols());
    let coef = -(dof + 1.0) / (2.0 * dof);
    for i in 0..z.rows() {
        for j in 0..centers.rows() {
            let zi = z.row(i);
            let uj = centers.row(j);
            let dist = sq_dist(zi, uj);
            // d w / d dist, times upstream, times 2 from d dist / d z
            let scale = 2.0 * g.get(i, j) * coef * w.get(i, j) / (1.0 + dist / dof);
            for c in 0..z.cols() {
                let diff = scale * (zi[c] - uj[c]);
                dz.data_mut()[i * z.cols() + c] += diff;
                du.data_mut()[j * centers.cols() + c] -= diff;
            }
        }
    }
    (dz, du)
}

pub(crate) fn kl_value(target: &Matrix, mix: &Matrix) -> f64 {
    let mut total = 0.0;
    let mut clamped = 0usize;
    for (&p, &q) in target.data().iter().zip(mix.data()) {
        if p > 0.0 {
            if q <= KL_EPS {
                clamped += 1;
            }
            total += p * (p / q.max(KL_EPS)).ln();
        }
    }
    if clamped > 0 {
        log::warn!("KL: {clamped} mixture entries at or below {KL_EPS:e} were clamped");
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frobenius_gradient_is_two_w() {
        let mut tape = Tape::new();
        let w = tape.leaf(Matrix::from_rows(&[[1.0, 2.0]]));
        let root = tape.frobenius_sq(w);
        let grads = tape.backward(root).unwrap();
        assert_eq!(grads.wrt(w), Matrix::from_rows(&[[2.0, 4.0]]));
    }

    #[test]
    fn constant_root_gives_zero_gradients() {
        let mut tape = Tape::new();
        let w = tape.leaf(Matrix::from_rows(&[[1.0, 2.0]]));
        let c = tape.leaf(Matrix::scalar(3.0));
        let grads = tape.backward(c).unwrap();
        assert_eq!(grads.wrt(w), Matrix::zeros(1, 2));
        assert!(grads.get(w).is_none());
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let mut tape = Tape::new();
        let w = tape.leaf(Matrix::zeros(2, 2));
        assert!(matches!(tape.backward(w), Err(DfcnError::Contract(_))));
    }

    #[test]
    fn backward_is_repeatable() {
        let mut tape = Tape::new();
        let a = tape.leaf(Matrix::from_fn(3, 4, |i, j| (i as f64 - j as f64) * 0.3));
        let b = tape.leaf(Matrix::from_fn(4, 2, |i, j| (i + 2 * j) as f64 * 0.1));
        let p = tape.matmul(a, b).unwrap();
        let s = tape.row_softmax(p);
        let r = tape.frobenius_sq(s);
        let g1 = tape.backward(r).unwrap();
        let g2 = tape.backward(r).unwrap();
        assert_eq!(g1.wrt(a), g2.wrt(a));
        assert_eq!(g1.wrt(b), g2.wrt(b));
    }

    #[test]
    fn identity_activation_records_nothing() {
        let mut tape = Tape::new();
        let a = tape.leaf(Matrix::zeros(1, 1));
        assert_eq!(tape.activate(a, Activation::Identity), a);
        assert_eq!(tape.len(), 1);
    }

    #[test]
    fn sigmoid_is_stable_for_large_inputs() {
        assert_eq!(Activation::Sigmoid.apply(1000.0), 1.0);
        assert_eq!(Activation::Sigmoid.apply(-1000.0), 0.0);
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
    }
}
