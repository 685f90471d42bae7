//! Symmetric graph convolutional autoencoder.
//!
//! Each layer computes `act(A_norm H W)`. The decoder reconstructs the
//! propagated attributes `A_norm X`, and the adjacency is reconstructed from
//! inner products of an embedding.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DfcnError, Result};
use crate::graph::SparseAdjacency;
use crate::numcore::{glorot_uniform, Activation, Matrix, Tape, Var};

/// Which reconstruction terms enter the graph autoencoder loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconMode {
    /// `L_w + gamma * L_a`
    #[default]
    Both,
    /// `L_w` only.
    #[serde(rename = "lw")]
    WeightedAttr,
    /// `L_a` only.
    #[serde(rename = "la")]
    Adjacency,
}

impl ReconMode {
    /// Combines the two terms; the tape-side combination uses the same expression.
    pub fn combine(self, l_w: f64, l_a: f64, gamma: f64) -> f64 {
        match self {
            ReconMode::Both => l_w + gamma * l_a,
            ReconMode::WeightedAttr => l_w,
            ReconMode::Adjacency => l_a,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IgaeParams {
    /// Encoder weights, `d -> g1 -> .. -> d'`.
    pub encoder: Vec<Matrix>,
    /// Decoder weights, `d' -> .. -> g1 -> d`.
    pub decoder: Vec<Matrix>,
    pub activation: Activation,
}

impl IgaeParams {
    pub fn init<R: Rng + ?Sized>(
        rng: &mut R,
        input_dim: usize,
        hidden: &[usize],
        latent_dim: usize,
        activation: Activation,
    ) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(latent_dim);
        let encoder = dims.windows(2).map(|w| glorot_uniform(rng, w[0], w[1])).collect();
        dims.reverse();
        let decoder = dims.windows(2).map(|w| glorot_uniform(rng, w[0], w[1])).collect();
        IgaeParams {
            encoder,
            decoder,
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.first().map_or(0, Matrix::rows)
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.last().map_or(0, Matrix::cols)
    }

    pub fn validate(&self) -> Result<()> {
        for (what, ws) in [("igae encoder", &self.encoder), ("igae decoder", &self.decoder)] {
            if ws.is_empty() {
                return Err(DfcnError::Validation(format!("{what} has no layers")));
            }
            for (i, pair) in ws.windows(2).enumerate() {
                if pair[0].cols() != pair[1].rows() {
                    return Err(DfcnError::Validation(format!(
                        "{what} layer {} expects {} inputs but layer {i} emits {}",
                        i + 1,
                        pair[1].rows(),
                        pair[0].cols()
                    )));
                }
            }
        }
        let dec_in = self.decoder[0].rows();
        let dec_out = self.decoder.last().unwrap().cols();
        if dec_in != self.latent_dim() || dec_out != self.input_dim() {
            return Err(DfcnError::Validation(format!(
                "igae decoder maps {dec_in} -> {dec_out}, expected {} -> {}",
                self.latent_dim(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let enc = self.encoder.iter().enumerate().map(|(i, w)| (format!("igae.enc.{i}.weight"), w));
        let dec = self.decoder.iter().enumerate().map(|(i, w)| (format!("igae.dec.{i}.weight"), w));
        enc.chain(dec).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.encoder.iter_mut().chain(self.decoder.iter_mut()).collect()
    }

    pub fn bind(&self, tape: &mut Tape) -> IgaeVars {
        IgaeVars {
            encoder: self.encoder.iter().map(|w| tape.leaf(w.clone())).collect(),
            decoder: self.decoder.iter().map(|w| tape.leaf(w.clone())).collect(),
            activation: self.activation,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IgaeVars {
    pub encoder: Vec<Var>,
    pub decoder: Vec<Var>,
    pub activation: Activation,
}

impl IgaeVars {
    pub fn all(&self) -> Vec<Var> {
        self.encoder.iter().chain(&self.decoder).copied().collect()
    }
}

/// `act(A_norm H W)`.
pub fn gcn_layer_on(
    tape: &mut Tape,
    adj_norm: &Arc<SparseAdjacency>,
    h: Var,
    w: Var,
    act: Activation,
) -> Result<Var> {
    let propagated = tape.spmm(adj_norm, h)?;
    let lin = tape.matmul(propagated, w)?;
    Ok(tape.activate(lin, act))
}

pub fn gcn_layer(adj_norm: &SparseAdjacency, h: &Matrix, w: &Matrix, act: Activation) -> Result<Matrix> {
    Ok(adj_norm.spmm(h)?.matmul(w)?.map(|v| act.apply(v)))
}

pub fn igae_encode_on(tape: &mut Tape, adj_norm: &Arc<SparseAdjacency>, x: Var, vars: &IgaeVars) -> Result<Var> {
    let mut h = x;
    for &w in &vars.encoder {
        h = gcn_layer_on(tape, adj_norm, h, w, vars.activation)?;
    }
    Ok(h)
}

/// Decoder output and the hidden representation feeding its last layer.
pub struct Decoded {
    pub z_hat: Var,
    pub last_hidden: Var,
}

pub fn igae_decode_on(
    tape: &mut Tape,
    adj_norm: &Arc<SparseAdjacency>,
    z: Var,
    vars: &IgaeVars,
) -> Result<Decoded> {
    let mut h = z;
    let mut last_hidden = z;
    for &w in &vars.decoder {
        last_hidden = h;
        h = gcn_layer_on(tape, adj_norm, h, w, vars.activation)?;
    }
    Ok(Decoded { z_hat: h, last_hidden })
}

/// `sigmoid(Z Z^T)`; with `extra`, the mean of that and `sigmoid(H H^T)`.
pub fn reconstruct_adjacency_on(tape: &mut Tape, z: Var, extra: Option<Var>) -> Result<Var> {
    let gram = |tape: &mut Tape, v: Var| -> Result<Var> {
        let t = tape.transpose(v);
        let g = tape.matmul(v, t)?;
        Ok(tape.activate(g, Activation::Sigmoid))
    };
    let base = gram(tape, z)?;
    match extra {
        None => Ok(base),
        Some(h) => {
            let other = gram(tape, h)?;
            let sum = tape.add(base, other)?;
            Ok(tape.scale(sum, 0.5))
        }
    }
}

pub fn reconstruct_adjacency(z: &Matrix) -> Matrix {
    z.matmul(&z.transpose())
        .expect("Z Z^T always conforms")
        .map(|v| Activation::Sigmoid.apply(v))
}

/// Tape handles of the three loss terms.
#[derive(Clone, Copy, Debug)]
pub struct IgaeLossVars {
    pub l_w: Var,
    pub l_a: Var,
    pub total: Var,
}

/// Records `L_w = |A_norm X - Z_hat|^2 / 2N`, `L_a = |A_norm - A_hat|^2 / 2N` and their combination.
/// `ax` and `adj_dense` are constants.
pub fn igae_loss_on(
    tape: &mut Tape,
    ax: Var,
    z_hat: Var,
    adj_dense: Var,
    a_hat: Var,
    gamma: f64,
    mode: ReconMode,
) -> Result<IgaeLossVars> {
    let n = tape.value(ax).rows().max(1) as f64;
    let dw = tape.sub(ax, z_hat)?;
    let sw = tape.frobenius_sq(dw);
    let l_w = tape.scale(sw, 1.0 / (2.0 * n));
    let da = tape.sub(adj_dense, a_hat)?;
    let sa = tape.frobenius_sq(da);
    let l_a = tape.scale(sa, 1.0 / (2.0 * n));
    let total = match mode {
        ReconMode::Both => {
            let weighted = tape.scale(l_a, gamma);
            tape.add(l_w, weighted)?
        }
        ReconMode::WeightedAttr => l_w,
        ReconMode::Adjacency => l_a,
    };
    Ok(IgaeLossVars { l_w, l_a, total })
}

/// `(L_w, L_a, L_IGAE)` with `L_IGAE = L_w + gamma * L_a`.
pub fn igae_loss(
    adj_norm: &SparseAdjacency,
    x: &Matrix,
    z_hat: &Matrix,
    a_hat: &Matrix,
    gamma: f64,
) -> Result<(f64, f64, f64)> {
    if gamma < 0.0 {
        return Err(DfcnError::Parameter(format!("gamma must be >= 0, got {gamma}")));
    }
    let mut tape = Tape::new();
    let ax = tape.leaf(adj_norm.spmm(x)?);
    let zh = tape.leaf(z_hat.clone());
    let ad = tape.leaf(adj_norm.to_dense());
    let ah = tape.leaf(a_hat.clone());
    let l = igae_loss_on(&mut tape, ax, zh, ad, ah, gamma, ReconMode::Both)?;
    Ok((tape.scalar_value(l.l_w), tape.scalar_value(l.l_a), tape.scalar_value(l.total)))
}

pub fn igae_encode(adj_norm: &Arc<SparseAdjacency>, x: &Matrix, params: &IgaeParams) -> Result<Matrix> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let xv = tape.leaf(x.clone());
    let z = igae_encode_on(&mut tape, adj_norm, xv, &vars)?;
    Ok(tape.value(z).clone())
}

pub fn igae_decode(adj_norm: &Arc<SparseAdjacency>, z: &Matrix, params: &IgaeParams) -> Result<Matrix> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let zv = tape.leaf(z.clone());
    let d = igae_decode_on(&mut tape, adj_norm, zv, &vars)?;
    Ok(tape.value(d.z_hat).clone())
}
