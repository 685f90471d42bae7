//! Structure and attribute information fusion.
//!
//! Blends the two latents with a learnable weight, propagates the blend over
//! the graph, recombines it through a row-softmax self-correlation matrix, and
//! adds a learnable skip connection. The result is the consensus embedding fed
//! to both decoders and used for clustering.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ae::{ae_decode_on, ae_encode_on};
use crate::error::{DfcnError, Result};
use crate::graph::{GraphData, SparseAdjacency};
use crate::igae::{igae_decode_on, igae_encode_on, reconstruct_adjacency_on};
use crate::model::{ModelParams, ModelVars};
use crate::numcore::{Matrix, Tape, Var};

/// Learnable blend weight `alpha` and skip scale `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams { alpha: 0.5, beta: 0.0 }
    }
}

/// What the decoders consume.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderInput {
    /// Both decoders read the consensus embedding.
    #[default]
    Consensus,
    /// Each decoder reads its own sub-network's latent.
    Own,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardOptions {
    /// When false the consensus embedding is `Z_AE` (the unfused baseline)
    /// and each decoder reads its own latent.
    pub fusion: bool,
    pub decoder_input: DecoderInput,
    /// Average the adjacency reconstruction over the consensus embedding and
    /// the graph decoder's last hidden layer.
    pub multi_level_adjacency: bool,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        ForwardOptions {
            fusion: true,
            decoder_input: DecoderInput::Consensus,
            multi_level_adjacency: false,
        }
    }
}

/// Every intermediate of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub z_ae: Matrix,
    pub z_igae: Matrix,
    pub z_i: Matrix,
    pub z_l: Matrix,
    pub s: Matrix,
    pub z_g: Matrix,
    pub z_tilde: Matrix,
    pub x_hat: Matrix,
    pub z_hat: Matrix,
    pub a_hat: Matrix,
}

/// Tape handles of a [`ForwardTrace`].
#[derive(Clone, Copy, Debug)]
pub struct TraceVars {
    pub z_ae: Var,
    pub z_igae: Var,
    pub z_i: Var,
    pub z_l: Var,
    pub s: Var,
    pub z_g: Var,
    pub z_tilde: Var,
    pub x_hat: Var,
    pub z_hat: Var,
    pub a_hat: Var,
}

impl TraceVars {
    pub fn materialize(&self, tape: &Tape) -> ForwardTrace {
        let v = |var| tape.value(var).clone();
        ForwardTrace {
            z_ae: v(self.z_ae),
            z_igae: v(self.z_igae),
            z_i: v(self.z_i),
            z_l: v(self.z_l),
            s: v(self.s),
            z_g: v(self.z_g),
            z_tilde: v(self.z_tilde),
            x_hat: v(self.x_hat),
            z_hat: v(self.z_hat),
            a_hat: v(self.a_hat),
        }
    }
}

/// `alpha Z_AE + (1 - alpha) Z_IGAE` with `alpha` a 1x1 node.
pub fn fuse_initial_on(tape: &mut Tape, z_ae: Var, z_igae: Var, alpha: Var) -> Result<Var> {
    let one = tape.leaf(Matrix::scalar(1.0));
    let complement = tape.sub(one, alpha)?;
    let a = tape.scalar_mul(alpha, z_ae)?;
    let b = tape.scalar_mul(complement, z_igae)?;
    tape.add(a, b)
}

pub fn local_enhance_on(tape: &mut Tape, adj_norm: &Arc<SparseAdjacency>, z_i: Var) -> Result<Var> {
    tape.spmm(adj_norm, z_i)
}

/// Row softmax of the Gram matrix `Z_L Z_L^T`.
pub fn self_correlate_on(tape: &mut Tape, z_l: Var) -> Result<Var> {
    let t = tape.transpose(z_l);
    let gram = tape.matmul(z_l, t)?;
    Ok(tape.row_softmax(gram))
}

/// Returns `(Z_G, Z_tilde)` with `Z_G = S Z_L` and `Z_tilde = beta Z_G + Z_L`.
pub fn global_recombine_on(tape: &mut Tape, s: Var, z_l: Var, beta: Var) -> Result<(Var, Var)> {
    let z_g = tape.matmul(s, z_l)?;
    let scaled = tape.scalar_mul(beta, z_g)?;
    let z_tilde = tape.add(scaled, z_l)?;
    Ok((z_g, z_tilde))
}

pub fn fuse_initial(z_ae: &Matrix, z_igae: &Matrix, alpha: f64) -> Result<Matrix> {
    let mut tape = Tape::new();
    let (a, b, al) = (tape.leaf(z_ae.clone()), tape.leaf(z_igae.clone()), tape.leaf(Matrix::scalar(alpha)));
    let out = fuse_initial_on(&mut tape, a, b, al)?;
    Ok(tape.value(out).clone())
}

pub fn local_enhance(adj_norm: &SparseAdjacency, z_i: &Matrix) -> Result<Matrix> {
    adj_norm.spmm(z_i)
}

pub fn self_correlate(z_l: &Matrix) -> Matrix {
    z_l.matmul(&z_l.transpose()).expect("Z Z^T always conforms").row_softmax()
}

pub fn global_recombine(s: &Matrix, z_l: &Matrix, beta: f64) -> Result<(Matrix, Matrix)> {
    let z_g = s.matmul(z_l)?;
    let z_tilde = z_g.scale(beta).add(z_l)?;
    Ok((z_g, z_tilde))
}

/// Records the full forward pass: both encoders, the fusion steps, both decoders, and the adjacency reconstruction.
pub fn saif_forward_on(
    tape: &mut Tape,
    adj_norm: &Arc<SparseAdjacency>,
    x: Var,
    vars: &ModelVars,
    opts: ForwardOptions,
) -> Result<TraceVars> {
    let z_ae = ae_encode_on(tape, x, &vars.ae)?;
    let z_igae = igae_encode_on(tape, adj_norm, x, &vars.igae)?;
    if tape.value(z_ae).shape() != tape.value(z_igae).shape() {
        return Err(DfcnError::shape("fuse_initial", tape.value(z_ae).shape(), tape.value(z_igae).shape()));
    }
    let z_i = fuse_initial_on(tape, z_ae, z_igae, vars.alpha)?;
    let z_l = local_enhance_on(tape, adj_norm, z_i)?;
    let s = self_correlate_on(tape, z_l)?;
    let (z_g, fused) = global_recombine_on(tape, s, z_l, vars.beta)?;

    let (z_tilde, wiring) = if opts.fusion {
        (fused, opts.decoder_input)
    } else {
        (z_ae, DecoderInput::Own)
    };
    let (ae_in, igae_in) = match wiring {
        DecoderInput::Consensus => (z_tilde, z_tilde),
        DecoderInput::Own => (z_ae, z_igae),
    };
    let x_hat = ae_decode_on(tape, ae_in, &vars.ae)?;
    let decoded = igae_decode_on(tape, adj_norm, igae_in, &vars.igae)?;
    let extra = opts.multi_level_adjacency.then_some(decoded.last_hidden);
    let a_hat = reconstruct_adjacency_on(tape, igae_in, extra)?;

    Ok(TraceVars {
        z_ae,
        z_igae,
        z_i,
        z_l,
        s,
        z_g,
        z_tilde,
        x_hat,
        z_hat: decoded.z_hat,
        a_hat,
    })
}

/// Runs the forward pass without keeping the tape.
pub fn saif_forward(data: &GraphData, params: &ModelParams, opts: ForwardOptions) -> Result<ForwardTrace> {
    if data.dim() != params.ae.input_dim() {
        return Err(DfcnError::shape("saif_forward", data.x.shape(), (params.ae.input_dim(), params.ae.latent_dim())));
    }
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let x = tape.leaf(data.x.clone());
    let trace = saif_forward_on(&mut tape, &data.adj_norm, x, &vars, opts)?;
    Ok(trace.materialize(&tape))
}
